"""Spectral clustering of superpoints into 3D instances.

Flat path: symmetric normalized Laplacian of the affinity matrix, eigengap
model selection, k-means discretization of the leading eigenvectors.
Hierarchical path: Hilbert-curve serialization of superpoint centroids,
windowed spectral clustering, then max-linkage merging of coarse masks across
neighboring windows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.spatial.distance import cdist

from .affinity import AffinityMatrix
from .errors import ConvergenceFailureError, ZeroDegreeError


@dataclass
class ClusterResult:
    """Hard assignment of every superpoint to one cluster."""

    assignments: dict[int, int]
    num_clusters: int
    singletons: list[int] = field(default_factory=list)

    def clusters(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_clusters)]
        for sp_id in sorted(self.assignments):
            out[self.assignments[sp_id]].append(sp_id)
        return out

    def partition(self) -> set[frozenset[int]]:
        return {frozenset(c) for c in self.clusters() if c}


@dataclass
class CoarseMask:
    """A within-window cluster awaiting cross-window merging."""

    superpoint_ids: set[int]
    group_index: int


def normalized_laplacian(A: AffinityMatrix, sparse: bool = False):
    """L = D^{-1/2} (D - A) D^{-1/2}; requires every row to have positive degree."""
    deg = A.degrees()
    if A.size == 0 or (deg <= 0.0).any():
        raise ZeroDegreeError("affinity has zero-degree rows; strip them to singletons first")
    dinv_sqrt = 1.0 / np.sqrt(deg)
    if sparse:
        Dm = sp.diags(dinv_sqrt)
        L = sp.identity(A.size, format="csr") - Dm @ A.to_csr() @ Dm
        return (L + L.T) * 0.5
    dense = A.to_dense()
    L = np.eye(A.size) - dense * np.outer(dinv_sqrt, dinv_sqrt)
    return (L + L.T) * 0.5


def eig_ascending(L, num_eigs: int | None = None, seed: int = 0):
    """Eigendecomposition of a symmetric PSD matrix, ascending eigenvalues.

    Dense inputs get the full spectrum; sparse inputs get the lowest
    ``num_eigs`` pairs via a shift-inverted Lanczos solve with a fixed starting
    vector. Eigenvector signs are canonicalized (largest-magnitude component
    positive) so results are stable.
    """
    if sp.issparse(L):
        m = L.shape[0]
        k = num_eigs if num_eigs is not None else max(64, m // 10)
        k = min(k, m - 1)
        v0 = np.full(m, 1.0 / math.sqrt(m))
        try:
            lambdas, vecs = eigsh(L, k=k, sigma=-0.1, which="LM", mode="normal", v0=v0)
        except ArpackNoConvergence as exc:
            raise ConvergenceFailureError(f"eigensolver failed to converge: {exc}") from exc
        order = np.argsort(lambdas)
        lambdas, vecs = lambdas[order], vecs[:, order]
    else:
        lambdas, vecs = np.linalg.eigh(np.asarray(L, dtype=np.float64))
    flip = np.take_along_axis(
        vecs, np.abs(vecs).argmax(axis=0, keepdims=True), axis=0
    )[0] < 0
    vecs = vecs * np.where(flip, -1.0, 1.0)
    return lambdas, vecs


def eigengap(lambdas: np.ndarray, total: int | None = None) -> int:
    """Largest-gap index H = argmax_{0<=j<=M-2} (lambda_{j+1} - lambda_j).

    Ties break to the smallest j; a single eigenvalue gives H = 0. Including
    j = 0 only matters for connected graphs (a single component has its
    dominant gap right after lambda_0), where it yields H = 0 and thus a
    single cluster; with c >= 2 components the gap at j = 0 is zero and the
    argmax lands at j = c - 1 as usual. When only a partial spectrum is
    available the search range shrinks to it.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    m = total if total is not None else lambdas.size
    if m <= 1:
        return 0
    hi = min(m - 2, lambdas.size - 2)
    gaps = lambdas[1:] - lambdas[:-1]  # gaps[j] = lambda_{j+1} - lambda_j
    return int(np.argmax(gaps[: hi + 1]))


def _kmeans_once(X: np.ndarray, k: int, first: int, max_iter: int = 100):
    n = X.shape[0]
    centers = [first]
    mind = ((X - X[first]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(mind))
        centers.append(nxt)
        np.minimum(mind, ((X - X[nxt]) ** 2).sum(axis=1), out=mind)
    C = X[np.array(centers)].copy()
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = cdist(X, C, "sqeuclidean")
        new = d2.argmin(axis=1)
        for c in range(k):  # deterministic empty-cluster repair
            if not np.any(new == c):
                far = int(np.argmax(d2[np.arange(n), new]))
                new[far] = c
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = labels == c
            if members.any():
                C[c] = X[members].mean(axis=0)
    inertia = float(((X - C[labels]) ** 2).sum())
    return labels, inertia


def cluster_eigvecs(Y: np.ndarray, k: int, seed: int = 0, restarts: int = 10) -> np.ndarray:
    """Row-normalize the eigenvector block and k-means it into k clusters.

    Seeding is greedy farthest-first from a seeded random start; the best of
    ``restarts`` runs by inertia wins. Deterministic given the seed.
    """
    Y = np.asarray(Y, dtype=np.float64)
    norms = np.linalg.norm(Y, axis=1, keepdims=True)
    X = np.where(norms > 0, Y / np.where(norms == 0, 1.0, norms), 0.0)
    n = X.shape[0]
    if k >= n:
        return np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    firsts = rng.integers(0, n, size=restarts)
    best_labels, best_inertia = None, np.inf
    for first in firsts:
        labels, inertia = _kmeans_once(X, k, int(first))
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels, inertia
    return best_labels


def spectral_cluster(A: AffinityMatrix, seed: int = 0, dense_limit: int = 2000) -> ClusterResult:
    """Full spectral clustering: strip isolated superpoints, decompose, discretize."""
    deg = A.degrees()
    singleton_ids = [i for i in range(A.size) if deg[i] == 0.0]
    keep = np.array([i for i in range(A.size) if deg[i] > 0.0], dtype=np.int64)

    assignments: dict[int, int] = {}
    if keep.size == 0:
        for rank, i in enumerate(singleton_ids):
            assignments[i] = rank
        return ClusterResult(assignments=assignments, num_clusters=len(singleton_ids),
                             singletons=singleton_ids)

    sub = A.subset(keep)
    if keep.size == 1:
        labels = np.zeros(1, dtype=np.int64)
        k = 1
    else:
        use_sparse = keep.size > dense_limit
        L = normalized_laplacian(sub, sparse=use_sparse)
        num_eigs = max(64, keep.size // 10) if use_sparse else None
        lambdas, vecs = eig_ascending(L, num_eigs=num_eigs, seed=seed)
        H = eigengap(lambdas, total=keep.size)
        k = H + 1
        labels = cluster_eigvecs(vecs[:, : H + 1], k, seed=seed)

    for local, sp_id in enumerate(keep):
        assignments[int(sp_id)] = int(labels[local])
    next_id = k
    for i in singleton_ids:
        assignments[i] = next_id
        next_id += 1
    return ClusterResult(assignments=assignments, num_clusters=next_id, singletons=singleton_ids)


# ---------------------------------------------------------------------------
# Hilbert serialization
# ---------------------------------------------------------------------------


def hilbert_index(x: int, y: int, z: int, bits: int) -> int:
    """Index of a 3D grid cell along the Hilbert curve of the given order."""
    X = [x, y, z]
    q = 1 << (bits - 1)
    while q > 1:  # fold axes into the canonical orientation
        p = q - 1
        for i in range(3):
            if X[i] & q:
                X[0] ^= p
            else:
                t = (X[0] ^ X[i]) & p
                X[0] ^= t
                X[i] ^= t
        q >>= 1
    for i in range(1, 3):  # Gray encode
        X[i] ^= X[i - 1]
    t = 0
    q = 1 << (bits - 1)
    while q > 1:
        if X[2] & q:
            t ^= q - 1
        q >>= 1
    for i in range(3):
        X[i] ^= t
    h = 0
    for b in range(bits - 1, -1, -1):  # interleave transposed bits, MSB first
        for i in range(3):
            h = (h << 1) | ((X[i] >> b) & 1)
    return h


def hilbert_serialize(centroids: np.ndarray, bits: int = 10) -> np.ndarray:
    """Order superpoints along a Hilbert curve over min-max normalized centroids.

    Returns the permutation of superpoint ids sorted by (Hilbert index, id).
    """
    if not (1 <= bits <= 20):
        raise ValueError(f"bits must be in [1, 20], got {bits}")
    pts = np.asarray(centroids, dtype=np.float64)
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    scale = np.where(span > 0, ((1 << bits) - 1) / np.where(span == 0, 1.0, span), 0.0)
    grid = np.floor((pts - lo) * scale + 0.5).astype(np.int64)
    grid = np.clip(grid, 0, (1 << bits) - 1)
    keys = [
        (hilbert_index(int(gx), int(gy), int(gz), bits), i)
        for i, (gx, gy, gz) in enumerate(grid)
    ]
    keys.sort()
    return np.array([i for _, i in keys], dtype=np.int64)


# ---------------------------------------------------------------------------
# Hierarchical clustering
# ---------------------------------------------------------------------------


def _group_distance(spans_a: set[int], spans_b: set[int]) -> int:
    return min(abs(a - b) for a in spans_a for b in spans_b)


def hierarchical_cluster(
    centroids: np.ndarray,
    A: AffinityMatrix,
    N_s: int | None = None,
    seed: int = 0,
    merge_threshold: float = 0.81,
    bits: int = 10,
    dense_limit: int = 2000,
) -> ClusterResult:
    """Windowed spectral clustering along the Hilbert order, then merging.

    The serialized superpoints are split into consecutive windows of ``N_s``
    (the last may be smaller). Each window is clustered independently on its
    induced affinity; the resulting coarse masks are then merged greedily,
    highest score first, where a pair's score is the maximum affinity between
    superpoints across the two masks and candidates must come from neighboring
    (or since-merged, overlapping) window spans. Merging stops when no
    candidate scores at least ``merge_threshold``.
    """
    m = A.size
    if N_s is None:
        N_s = max(2, math.ceil(m / 2))
    if N_s < 2:
        raise ValueError(f"window size N_s must be >= 2, got {N_s}")
    order = hilbert_serialize(centroids, bits=bits)
    windows = [order[start : start + N_s] for start in range(0, m, N_s)]

    deg = A.degrees()
    global_singletons = [i for i in range(m) if deg[i] == 0.0]

    masks: dict[int, CoarseMask] = {}
    spans: dict[int, set[int]] = {}
    mask_of: dict[int, int] = {}
    next_mask = 0
    for gidx, window in enumerate(windows):
        window = np.sort(window)  # process in id order; a full window equals the flat path
        sub = A.subset(window)
        local = spectral_cluster(sub, seed=seed, dense_limit=dense_limit)
        for cluster in local.clusters():
            members = {int(window[i]) for i in cluster}
            masks[next_mask] = CoarseMask(superpoint_ids=members, group_index=gidx)
            spans[next_mask] = {gidx}
            for sp_id in members:
                mask_of[sp_id] = next_mask
            next_mask += 1

    # max-linkage scores between distinct masks, from the affinity support
    scores: dict[tuple[int, int], float] = {}
    for (p, q), w in A.entries.items():
        mp, mq = mask_of[p], mask_of[q]
        if mp == mq:
            continue
        key = (mp, mq) if mp < mq else (mq, mp)
        if w > scores.get(key, 0.0):
            scores[key] = w

    def candidate(a: int, b: int) -> bool:
        if spans[a] == spans[b] and len(spans[a]) == 1:
            return False  # both still inside one window: spectral already separated them
        return _group_distance(spans[a], spans[b]) <= 1

    alive = set(masks)
    while True:
        best = None
        for (a, b), s in scores.items():
            if s < merge_threshold or s <= 0.0:
                continue
            if a not in alive or b not in alive or not candidate(a, b):
                continue
            if best is None or s > best[0] or (s == best[0] and (a, b) < best[1:]):
                best = (s, a, b)
        if best is None:
            break
        _, a, b = best
        masks[a].superpoint_ids |= masks[b].superpoint_ids
        spans[a] |= spans[b]
        alive.discard(b)
        for (p, q), s in list(scores.items()):
            if b in (p, q):
                other = q if p == b else p
                if other == a:
                    del scores[(p, q)]
                    continue
                key = (a, other) if a < other else (other, a)
                if s > scores.get(key, 0.0):
                    scores[key] = s
                del scores[(p, q)]

    assignments: dict[int, int] = {}
    final_ids = sorted(alive)
    for cluster_id, mid in enumerate(final_ids):
        for sp_id in masks[mid].superpoint_ids:
            assignments[sp_id] = cluster_id
    return ClusterResult(
        assignments=assignments,
        num_clusters=len(final_ids),
        singletons=global_singletons,
    )


def dump_clusters(result: ClusterResult, superpoints, path) -> None:
    """Instance dump: cluster id -> member superpoints and their points."""
    instances = []
    by_id = {sp.id: sp for sp in superpoints}
    for cid, members in enumerate(result.clusters()):
        points = sorted(
            int(p) for sp_id in members for p in by_id[sp_id].point_indices
        )
        instances.append({"id": cid, "superpoints": members, "points": points})
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump({"instances": instances}, fh, sort_keys=True)
