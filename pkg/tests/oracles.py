"""Independent reference implementations used to check the production code.

Everything here is deliberately written in plain Python with explicit loops,
sharing no code with the package. Arithmetic mirrors the documented operation
order so comparisons can be exact.
"""

from __future__ import annotations

import math


# ---------------------------------------------------------------------------
# projection / rasterization
# ---------------------------------------------------------------------------


def project_point_scalar(p, frame, tau_depth=0.05):
    """Project one world point; returns (u, v) or None if invisible."""
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    e = frame.extrinsics
    xc = e[0, 0] * x + e[0, 1] * y + e[0, 2] * z + e[0, 3]
    yc = e[1, 0] * x + e[1, 1] * y + e[1, 2] * z + e[1, 3]
    zc = e[2, 0] * x + e[2, 1] * y + e[2, 2] * z + e[2, 3]
    if zc <= 0.0:
        return None
    fx, fy, cx, cy = frame.intrinsics
    u = math.floor(fx * xc / zc + cx + 0.5)
    v = math.floor(fy * yc / zc + cy + 0.5)
    if not (0 <= u < frame.width and 0 <= v < frame.height):
        return None
    if frame.depth is not None:
        d = float(frame.depth[v, u])
        if d != 0.0 and abs(zc - d) > tau_depth:
            return None
    return int(u), int(v)


def decode_rle_scalar(counts, width, height):
    """Column-major zeros-first RLE decode as a list-of-rows grid."""
    grid = [[False] * width for _ in range(height)]
    idx = 0
    value = False
    for c in counts:
        for _ in range(int(c)):
            col, row = divmod(idx, height)
            grid[row][col] = value
            idx += 1
        value = not value
    assert idx == width * height
    return grid


def overlap_oracle(point_indices, mask, frame, cloud, tau_depth=0.05):
    """Containment overlap of one superpoint with one mask, point by point."""
    grid = decode_rle_scalar(mask.rle.tolist(), frame.width, frame.height)
    n_vis = 0
    n_in = 0
    for pi in point_indices:
        hit = project_point_scalar(cloud.positions[pi], frame, tau_depth)
        if hit is None:
            continue
        n_vis += 1
        u, v = hit
        if grid[v][u]:
            n_in += 1
    return n_in / n_vis if n_vis else 0.0


def overlap_table_oracle(superpoints, frames, cloud, tau_depth=0.05):
    """All positive (superpoint id, global mask id) -> score entries."""
    entries = {}
    mask_id = 0
    for frame in frames:
        for mask in frame.masks:
            for sp in superpoints:
                score = overlap_oracle(sp.point_indices, mask, frame, cloud, tau_depth)
                if score > 0.0:
                    entries[(sp.id, mask_id)] = score
            mask_id += 1
    return entries


# ---------------------------------------------------------------------------
# graph components
# ---------------------------------------------------------------------------


def connected_components(size, pairs):
    """Union-find components over nodes 0..size-1; returns a partition set."""
    parent = list(range(size))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    groups = {}
    for node in range(size):
        groups.setdefault(find(node), []).append(node)
    return {frozenset(g) for g in groups.values()}


# ---------------------------------------------------------------------------
# Hilbert curve (inverse mapping: index -> grid point)
# ---------------------------------------------------------------------------


def hilbert_point(h, bits):
    """Grid point of a 3D Hilbert index (transpose-form inverse transform)."""
    X = [0, 0, 0]
    for i in range(3 * bits):
        bit = (h >> (3 * bits - 1 - i)) & 1
        X[i % 3] = (X[i % 3] << 1) | bit
    n = 3
    t = X[n - 1] >> 1
    for i in range(n - 1, 0, -1):
        X[i] ^= X[i - 1]
    X[0] ^= t
    q = 2
    while q != (1 << bits):
        p = q - 1
        for i in range(n - 1, -1, -1):
            if X[i] & q:
                X[0] ^= p
            else:
                tt = (X[0] ^ X[i]) & p
                X[0] ^= tt
                X[i] ^= tt
        q <<= 1
    return tuple(X)


# ---------------------------------------------------------------------------
# average precision
# ---------------------------------------------------------------------------


def _iou(a: set, b: set) -> float:
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def _label_ok(pred, gt, table, tau_bert):
    va = table.entries[pred]
    vb = table.entries[gt]
    return float(va @ vb) >= tau_bert


def _class_ap_oracle(preds, gts, threshold):
    """preds: [(id, conf, points set)] sorted by (-conf, id); gts: [points set]."""
    matched = [False] * len(gts)
    tps = []
    for _, _, pts in preds:
        best_iou = 0.0
        best = -1
        for gi, gpts in enumerate(gts):
            if matched[gi]:
                continue
            ov = _iou(pts, gpts)
            if ov >= threshold and ov > best_iou:
                best_iou = ov
                best = gi
        if best >= 0:
            matched[best] = True
            tps.append(1)
        else:
            tps.append(0)
    if not tps:
        return 0.0
    precisions = []
    recalls = []
    tp = 0
    for rank, hit in enumerate(tps, start=1):
        tp += hit
        precisions.append(tp / rank)
        recalls.append(tp / len(gts))
    envelope = [max(precisions[i:]) for i in range(len(precisions))]
    ap = 0.0
    prev = 0.0
    for r, p in zip(recalls, envelope):
        ap += (r - prev) * p
        prev = r
    return ap


def ap_oracle(preds, gts, table, thresholds, tau_bert=0.8):
    """Full AP protocol, brute force. preds: Instance3D-like; gts: GroundTruthInstance-like.

    Returns (ap, ap50, ap25) matching the production evaluator exactly.
    """
    classes = sorted({gt.label for gt in gts})
    if not classes:
        return 0.0, 0.0, 0.0
    usable = [p for p in preds if p.label != "unknown"]
    usable.sort(key=lambda p: (-p.confidence, p.id))
    pred_sets = [(p.id, p.confidence, set(int(i) for i in p.point_indices), p.label) for p in usable]
    gt_sets = {cls: [set(int(i) for i in g.point_indices) for g in gts if g.label == cls]
               for cls in classes}
    by_class = {
        cls: [(pid, conf, pts) for pid, conf, pts, plabel in pred_sets
              if _label_ok(plabel, cls, table, tau_bert)]
        for cls in classes
    }

    def mean_over_classes(threshold):
        total = 0.0
        for cls in classes:
            total += _class_ap_oracle(by_class[cls], gt_sets[cls], threshold)
        return total / len(classes)

    per_threshold = [mean_over_classes(t) for t in thresholds]
    ap = sum(per_threshold) / len(thresholds)
    return ap, mean_over_classes(0.50), mean_over_classes(0.25)
