"""Project superpoints onto posed frames and score their overlap with 2D masks.

The per-(superpoint, mask) overlap score is the fraction of the superpoint's
visible projected points that land on set mask pixels (containment ratio).
A strict intersection-over-union mode over pixel footprints is available for
comparison. Scores of zero are never stored.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pcio import Frame, Mask2D, PointCloud, decode_rle
from .superpoint import Superpoint


@dataclass
class OverlapTable:
    """Sparse (superpoint, global mask id) -> overlap score table.

    Global mask ids run over (frame order, mask order within frame).
    """

    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    mask_labels: list[str] = field(default_factory=list)
    mask_scores: list[float] = field(default_factory=list)
    mask_frames: list[int] = field(default_factory=list)
    num_superpoints: int = 0

    @property
    def num_masks(self) -> int:
        return len(self.mask_labels)

    def scores_for_superpoint(self, sp_id: int) -> list[tuple[int, float]]:
        return [(mid, s) for (sid, mid), s in self.entries.items() if sid == sp_id]

    def dump_jsonl(self, path) -> None:
        with open(Path(path), "w", encoding="utf-8") as fh:
            for (sid, mid) in sorted(self.entries):
                rec = {"sp": sid, "mask": mid, "score": self.entries[(sid, mid)]}
                fh.write(json.dumps(rec) + "\n")


def project_points(points: np.ndarray, frame: Frame, tau_depth: float = 0.05):
    """Pin-hole projection of world points into a frame.

    Returns ``(uv, visible)``: integer pixel coordinates (nearest-integer
    rounding, half-up) and a visibility flag per point. A point is visible iff
    it lies in front of the camera, its rounded pixel is inside the image, and,
    when the frame carries a depth map with a nonzero measurement at that
    pixel, its camera depth agrees within ``tau_depth`` meters.
    """
    pts = np.asarray(points, dtype=np.float64)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    ext = frame.extrinsics
    # elementwise on purpose: keeps operation order identical to a scalar evaluation
    xc = ext[0, 0] * x + ext[0, 1] * y + ext[0, 2] * z + ext[0, 3]
    yc = ext[1, 0] * x + ext[1, 1] * y + ext[1, 2] * z + ext[1, 3]
    zc = ext[2, 0] * x + ext[2, 1] * y + ext[2, 2] * z + ext[2, 3]

    fx, fy, cx, cy = frame.intrinsics
    visible = zc > 0.0
    uv = np.full((pts.shape[0], 2), -1, dtype=np.int64)
    if visible.any():
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            uf = fx * xc / zc + cx
            vf = fy * yc / zc + cy
            u = np.floor(uf + 0.5)
            v = np.floor(vf + 0.5)
        in_bounds = (u >= 0) & (u < frame.width) & (v >= 0) & (v < frame.height)
        visible &= in_bounds
        uv[visible, 0] = u[visible].astype(np.int64)
        uv[visible, 1] = v[visible].astype(np.int64)
        if frame.depth is not None and visible.any():
            sel = np.flatnonzero(visible)
            d = frame.depth[uv[sel, 1], uv[sel, 0]]
            ok = (d == 0) | (np.abs(zc[sel] - d) <= tau_depth)
            visible[sel[~ok]] = False
            uv[sel[~ok]] = -1
    return uv, visible


def _mask_stack(frame: Frame) -> np.ndarray:
    """All of a frame's masks decoded into one (num_masks, H*W) bool array."""
    flats = [
        decode_rle(m.rle, frame.width, frame.height).ravel(order="C") for m in frame.masks
    ]
    return np.stack(flats, axis=0) if flats else np.empty((0, frame.width * frame.height), bool)


def overlap_score(
    sp: Superpoint,
    mask: Mask2D,
    frame: Frame,
    cloud: PointCloud,
    tau_depth: float = 0.05,
    strict_iou: bool = False,
) -> float:
    """Overlap of a single superpoint with a single mask (see module docstring)."""
    uv, visible = project_points(cloud.positions[sp.point_indices], frame, tau_depth)
    n_vis = int(visible.sum())
    if n_vis == 0:
        return 0.0
    bitmap = decode_rle(mask.rle, frame.width, frame.height).ravel(order="C")
    lin = uv[visible, 1] * frame.width + uv[visible, 0]
    if strict_iou:
        covered = np.unique(lin)
        inter = int(bitmap[covered].sum())
        union = int(bitmap.sum()) + covered.size - inter
        return inter / union if union else 0.0
    return int(bitmap[lin].sum()) / n_vis


def build_overlap_table(
    superpoints: list[Superpoint],
    frames: list[Frame],
    cloud: PointCloud,
    tau_depth: float = 0.05,
    strict_iou: bool = False,
    threads: int = 1,
) -> OverlapTable:
    """Score every (superpoint, mask) pair with a positive overlap.

    Frames are independent; with ``threads > 1`` they are processed by a
    thread pool. The merge is keyed, so the result is order-independent.
    """
    table = OverlapTable(num_superpoints=len(superpoints))
    mask_base = []
    for fidx, frame in enumerate(frames):
        mask_base.append(table.num_masks)
        for m in frame.masks:
            table.mask_labels.append(m.label)
            table.mask_scores.append(m.score)
            table.mask_frames.append(fidx)

    member_idx = [sp.point_indices for sp in superpoints]

    def process(fidx: int) -> dict[tuple[int, int], float]:
        frame = frames[fidx]
        if not frame.masks:
            return {}
        uv, visible = project_points(cloud.positions, frame, tau_depth)
        lin_all = uv[:, 1] * frame.width + uv[:, 0]
        stack = _mask_stack(frame)
        areas = stack.sum(axis=1)
        out: dict[tuple[int, int], float] = {}
        base = mask_base[fidx]
        for sp in superpoints:
            vis = visible[member_idx[sp.id]]
            if not vis.any():
                continue
            lin = lin_all[member_idx[sp.id]][vis]
            if strict_iou:
                covered = np.unique(lin)
                inter = stack[:, covered].sum(axis=1)
                union = areas + covered.size - inter
                with np.errstate(invalid="ignore"):
                    scores = np.where(union > 0, inter / union, 0.0)
            else:
                scores = stack[:, lin].sum(axis=1) / vis.sum()
            for local, s in enumerate(scores):
                if s > 0.0:
                    out[(sp.id, base + local)] = float(s)
        return out

    if threads > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for chunk in pool.map(process, range(len(frames))):
                table.entries.update(chunk)
    else:
        for fidx in range(len(frames)):
            table.entries.update(process(fidx))
    return table
