"""Pairwise superpoint coherence matrices and their Hadamard combination.

Three factors feed the merge decision: mask coherence (gated co-overlap with
the same 2D masks), semantic coherence (thresholded cosine between voted-label
embeddings, neutral 1 for pairs involving an unlabeled superpoint), and binary
spatial adjacency from farthest-point samples under an adaptive threshold.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .pcio import EmbeddingTable, PointCloud
from .project import OverlapTable
from .superpoint import Superpoint
from .errors import SizeMismatchError, UnknownLabelError


@dataclass
class AffinityMatrix:
    """Sparse symmetric non-negative matrix over superpoints.

    Entries are stored once with i < j; the diagonal is implicit. Superpoints
    listed in ``neutral`` contribute a factor of 1 for any pair they touch when
    this matrix participates in a Hadamard product (used by the semantic
    factor for unlabeled superpoints).
    """

    size: int
    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    neutral: frozenset[int] = frozenset()

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 1.0
        key = (i, j) if i < j else (j, i)
        return self.entries.get(key, 0.0)

    def factor(self, i: int, j: int) -> float:
        """Value this matrix contributes to a Hadamard product at (i, j)."""
        if i in self.neutral or j in self.neutral:
            return 1.0
        return self.get(i, j)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.size, dtype=np.float64)
        for (i, j), w in self.entries.items():
            deg[i] += w
            deg[j] += w
        return deg

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.size, self.size), dtype=np.float64)
        for (i, j), w in self.entries.items():
            dense[i, j] = w
            dense[j, i] = w
        return dense

    def to_csr(self):
        if not self.entries:
            return coo_matrix((self.size, self.size), dtype=np.float64).tocsr()
        ij = np.array(list(self.entries.keys()), dtype=np.int64)
        w = np.fromiter(self.entries.values(), dtype=np.float64, count=len(self.entries))
        rows = np.concatenate([ij[:, 0], ij[:, 1]])
        cols = np.concatenate([ij[:, 1], ij[:, 0]])
        vals = np.concatenate([w, w])
        return coo_matrix((vals, (rows, cols)), shape=(self.size, self.size)).tocsr()

    def subset(self, ids: np.ndarray) -> "AffinityMatrix":
        """Induced submatrix over ``ids`` (reindexed 0..len(ids)-1, same order)."""
        remap = {int(g): local for local, g in enumerate(ids)}
        sub: dict[tuple[int, int], float] = {}
        for (i, j), w in self.entries.items():
            if i in remap and j in remap:
                a, b = remap[i], remap[j]
                sub[(a, b) if a < b else (b, a)] = w
        neutral = frozenset(remap[g] for g in self.neutral if g in remap)
        return AffinityMatrix(size=len(ids), entries=sub, neutral=neutral)

    def dump_jsonl(self, path) -> None:
        with open(Path(path), "w", encoding="utf-8") as fh:
            for (i, j) in sorted(self.entries):
                fh.write(json.dumps({"i": i, "j": j, "w": self.entries[(i, j)]}) + "\n")


def gate(x: float, tau: float) -> float:
    """Pass x through iff strictly above the threshold, else 0."""
    return x if x > tau else 0.0


def mask_coherence(table: OverlapTable, tau_iou: float = 0.9) -> AffinityMatrix:
    """Sum over masks of the product of both superpoints' gated overlap scores."""
    if not (0.0 <= tau_iou < 1.0):
        raise ValueError(f"tau_iou must be in [0, 1), got {tau_iou}")
    passing: dict[int, list[tuple[int, float]]] = defaultdict(list)
    for (sid, mid), score in table.entries.items():
        g = gate(score, tau_iou)
        if g > 0.0:
            passing[mid].append((sid, g))
    entries: dict[tuple[int, int], float] = defaultdict(float)
    for sps in passing.values():
        sps.sort()
        for a in range(len(sps)):
            ia, ga = sps[a]
            for b in range(a + 1, len(sps)):
                ib, gb = sps[b]
                entries[(ia, ib)] += ga * gb
    return AffinityMatrix(size=table.num_superpoints, entries=dict(entries))


def vote_labels(table: OverlapTable, k: int = 5) -> dict[int, str | None]:
    """Assign each superpoint the majority label of its top-k overlapping masks.

    Masks rank by (score desc, global mask id asc). Label ties break by larger
    summed overlap, then lexicographically. Superpoints without any
    positive-score mask get no label.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    per_sp: dict[int, list[tuple[float, int]]] = defaultdict(list)
    for (sid, mid), score in table.entries.items():
        per_sp[sid].append((score, mid))
    labels: dict[int, str | None] = {i: None for i in range(table.num_superpoints)}
    for sid, cand in per_sp.items():
        cand.sort(key=lambda t: (-t[0], t[1]))
        top = cand[:k]
        count: dict[str, int] = defaultdict(int)
        summed: dict[str, float] = defaultdict(float)
        for score, mid in top:
            label = table.mask_labels[mid]
            count[label] += 1
            summed[label] += score
        labels[sid] = min(count, key=lambda lab: (-count[lab], -summed[lab], lab))
    return labels


def semantic_coherence(
    labels: dict[int, str | None],
    table: EmbeddingTable,
    tau_sim: float = 0.9,
    size: int | None = None,
) -> AffinityMatrix:
    """Thresholded cosine similarity between voted-label embeddings.

    Pairs of labeled superpoints score gate(cos, tau_sim); pairs touching an
    unlabeled superpoint are neutral (factor 1 in the combined product, still
    gated by the mask and spatial factors).
    """
    if not (0.0 <= tau_sim < 1.0):
        raise ValueError(f"tau_sim must be in [0, 1), got {tau_sim}")
    if size is None:
        size = len(labels)
    labeled = sorted(i for i, lab in labels.items() if lab is not None)
    unlabeled = frozenset(i for i in range(size) if labels.get(i) is None)
    entries: dict[tuple[int, int], float] = {}
    if labeled:
        for i in labeled:
            if labels[i] not in table:
                raise UnknownLabelError(f"voted label {labels[i]!r} missing from embedding table")
        emb = np.stack([table.vector(labels[i]) for i in labeled])
        cos = emb @ emb.T
        for a in range(len(labeled)):
            for b in range(a + 1, len(labeled)):
                c = float(cos[a, b])
                if c > tau_sim:
                    entries[(labeled[a], labeled[b])] = c
    return AffinityMatrix(size=size, entries=entries, neutral=unlabeled)


def spatial_adjacency(superpoints: list[Superpoint], cloud: PointCloud) -> AffinityMatrix:
    """Binary adjacency: min FPS-sample distance below twice the mean NN spacing.

    For each pair, the threshold tau_c is twice the mean nearest-neighbor
    distance within the union of the two sample sets, which adapts to local
    sampling density. Pairs whose bounding spheres are provably farther than
    any possible tau_c are skipped without the exact test.
    """
    m = len(superpoints)
    samples = []
    radius = np.zeros(m)
    own_nn = np.full(m, np.inf)
    for idx, sp in enumerate(superpoints):
        if sp.fps_samples is None:
            raise ValueError(f"superpoint {sp.id} has no FPS samples")
        pts = cloud.positions[sp.fps_samples]
        samples.append(pts)
        radius[idx] = np.sqrt(((pts - sp.centroid) ** 2).sum(axis=1).max())
        if len(pts) >= 2:
            dd, _ = cKDTree(pts).query(pts, k=2)
            own_nn[idx] = dd[:, 1].mean()
    centroids = np.stack([sp.centroid for sp in superpoints])

    entries: dict[tuple[int, int], float] = {}
    for i in range(m):
        for j in range(i + 1, m):
            gap_lb = np.linalg.norm(centroids[i] - centroids[j]) - radius[i] - radius[j]
            bound = own_nn[i] + own_nn[j]
            if np.isfinite(bound) and gap_lb > 2.0 * bound:
                continue  # tau_c <= 2*(nn_i + nn_j) < gap, cannot be adjacent
            d = cdist(samples[i], samples[j]).min()
            union = np.concatenate([samples[i], samples[j]])
            dd, _ = cKDTree(union).query(union, k=2)
            tau_c = 2.0 * dd[:, 1].mean()
            if d < tau_c:
                entries[(superpoints[i].id, superpoints[j].id)] = 1.0
    return AffinityMatrix(size=m, entries=entries)


def combine(am: AffinityMatrix, as_: AffinityMatrix, ac: AffinityMatrix) -> AffinityMatrix:
    """Entrywise product A = A^M * A^S * A^C (A^S neutral-1 rule applied)."""
    if not (am.size == as_.size == ac.size):
        raise SizeMismatchError(
            f"factor sizes differ: {am.size}, {as_.size}, {ac.size}"
        )
    small, other = (am, ac) if len(am.entries) <= len(ac.entries) else (ac, am)
    entries: dict[tuple[int, int], float] = {}
    for (i, j), w in small.entries.items():
        w2 = other.entries.get((i, j))
        if w2 is None:
            continue
        value = w * w2 * as_.factor(i, j)
        if value > 0.0:
            entries[(i, j)] = value
    return AffinityMatrix(size=am.size, entries=entries)
