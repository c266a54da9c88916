"""Oversegment a point cloud into geometrically homogeneous superpoints.

The segmentation is the Felzenszwalb-Huttenlocher criterion run over a k-NN
graph whose edge weights mix normal disagreement and color difference,
followed by a minimum-size merge pass. Superpoints are the atomic units the
rest of the pipeline merges into instances.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateNeighborhoodWarning
from .pcio import PointCloud

# max possible ||rgb_i - rgb_j|| for 8-bit colors, used to normalize into [0, 1]
_COLOR_NORM = 441.673


@dataclass
class Superpoint:
    """A connected, geometrically homogeneous subset of the point cloud."""

    id: int
    point_indices: np.ndarray  # sorted global point indices
    centroid: np.ndarray  # (3,)
    fps_samples: np.ndarray | None = None
    label: str | None = None
    label_embedding: np.ndarray | None = None

    def __post_init__(self):
        self.point_indices = np.sort(np.asarray(self.point_indices, dtype=np.int64))
        if self.point_indices.size == 0:
            raise ValueError("superpoint must contain at least one point")
        self.centroid = np.asarray(self.centroid, dtype=np.float64)

    def __len__(self) -> int:
        return self.point_indices.size


@dataclass
class PointGraph:
    """Undirected k-NN graph over the cloud; edges stored once with i < j."""

    edges_i: np.ndarray
    edges_j: np.ndarray
    weights: np.ndarray
    num_points: int
    k: int

    @property
    def num_edges(self) -> int:
        return self.edges_i.size


def estimate_normals(cloud: PointCloud, k: int = 16) -> np.ndarray:
    """Per-point unit normals from a PCA plane fit of the k nearest neighbors.

    The neighborhood includes the query point itself. Normals are oriented to
    have non-negative z; when z is exactly zero the sign is fixed so the first
    nonzero of (x, y) is positive, which keeps coplanar regions consistent.
    """
    if k < 3:
        raise ValueError(f"normal estimation needs k >= 3, got {k}")
    pos = cloud.positions
    n = len(cloud)
    if n < k:
        raise ValueError(f"normal estimation needs at least k={k} points, got {n}")
    tree = cKDTree(pos)
    _, idx = tree.query(pos, k=k)
    neigh = pos[idx]  # (N, k, 3)
    centered = neigh - neigh.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0].copy()

    degenerate = eigvals[:, 2] <= 1e-12
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} point(s) have degenerate neighborhoods; "
            "falling back to normal (0, 0, 1)",
            DegenerateNeighborhoodWarning,
        )
        normals[degenerate] = (0.0, 0.0, 1.0)

    sign = np.sign(normals[:, 2])
    zero_z = sign == 0
    if zero_z.any():
        sx = np.sign(normals[:, 0])
        sign = np.where(zero_z, np.where(sx != 0, sx, np.sign(normals[:, 1])), sign)
    normals *= np.where(sign < 0, -1.0, 1.0)[:, None]
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return normals


def build_knn_graph(
    cloud: PointCloud,
    k: int = 16,
    w_normal: float = 1.0,
    w_color: float = 0.2,
    normals: np.ndarray | None = None,
) -> PointGraph:
    """Build the undirected k-NN graph with normal/color dissimilarity weights.

    weight = w_normal * (1 - |n_i . n_j|) + w_color * ||rgb_i - rgb_j|| / 441.673;
    clouds without colors contribute zero to the color term.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if normals is None:
        normals = cloud.normals
    if normals is None:
        normals = estimate_normals(cloud, k=max(k, 8))
    pos = cloud.positions
    n = len(cloud)
    if n == 1:
        return PointGraph(
            edges_i=np.empty(0, np.int64),
            edges_j=np.empty(0, np.int64),
            weights=np.empty(0, np.float64),
            num_points=1,
            k=k,
        )
    kq = min(k + 1, n)
    tree = cKDTree(pos)
    _, idx = tree.query(pos, k=kq)
    src = np.repeat(np.arange(n, dtype=np.int64), kq - 1)
    dst = idx[:, 1:].astype(np.int64).ravel()
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    keys = lo * n + hi
    uniq, first = np.unique(keys, return_index=True)
    lo, hi = lo[first], hi[first]

    dot = np.abs(np.einsum("ij,ij->i", normals[lo], normals[hi]))
    weights = w_normal * (1.0 - np.minimum(dot, 1.0))
    if cloud.colors is not None and w_color != 0.0:
        drgb = cloud.colors[lo].astype(np.float64) - cloud.colors[hi].astype(np.float64)
        weights = weights + w_color * (np.linalg.norm(drgb, axis=1) / _COLOR_NORM)
    return PointGraph(edges_i=lo, edges_j=hi, weights=weights, num_points=n, k=k)


class _UnionFind:
    __slots__ = ("parent", "size", "internal")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.internal = [0.0] * n  # max MST edge weight inside each component

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, ra: int, rb: int, weight: float) -> int:
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.internal[ra] = weight
        return ra


def segment_superpoints(
    graph: PointGraph,
    cloud: PointCloud,
    kf: float = 0.05,
    min_size: int = 30,
) -> list[Superpoint]:
    """Felzenszwalb-Huttenlocher segmentation plus a minimum-size merge pass.

    Edges are processed by ascending weight (ties by (i, j)); two components
    merge when the edge weight is at most min(Int(C) + kf/|C|) over both sides.
    Afterwards any component smaller than ``min_size`` is merged into its
    lowest-weight-connected neighbor. Superpoint ids follow the smallest
    member point index, so the output is deterministic.
    """
    n = graph.num_points
    order = np.lexsort((graph.edges_j, graph.edges_i, graph.weights))
    ei = graph.edges_i[order].tolist()
    ej = graph.edges_j[order].tolist()
    ew = graph.weights[order].tolist()

    uf = _UnionFind(n)
    find = uf.find
    size = uf.size
    internal = uf.internal
    for a, b, w in zip(ei, ej, ew):
        ra = find(a)
        rb = find(b)
        if ra == rb:
            continue
        if w <= min(internal[ra] + kf / size[ra], internal[rb] + kf / size[rb]):
            uf.union(ra, rb, w)

    if min_size > 1:
        for a, b, w in zip(ei, ej, ew):
            ra = find(a)
            rb = find(b)
            if ra == rb:
                continue
            if size[ra] < min_size or size[rb] < min_size:
                uf.union(ra, rb, w)

    roots = np.fromiter((find(i) for i in range(n)), dtype=np.int64, count=n)
    _, first_occurrence, inverse = np.unique(roots, return_index=True, return_inverse=True)
    # component rank ordered by smallest member point index
    rank = np.argsort(np.argsort(first_occurrence))
    comp = rank[inverse]

    superpoints = []
    order_pts = np.argsort(comp, kind="stable")
    boundaries = np.searchsorted(comp[order_pts], np.arange(rank.size + 1))
    for sid in range(rank.size):
        members = order_pts[boundaries[sid] : boundaries[sid + 1]]
        superpoints.append(
            Superpoint(
                id=sid,
                point_indices=members,
                centroid=cloud.positions[members].mean(axis=0),
            )
        )
    return superpoints


def sample_fps(sp: Superpoint, cloud: PointCloud, k_fps: int = 64) -> np.ndarray:
    """Farthest point sampling of a superpoint, seeded at the point nearest the centroid.

    Deterministic: distance ties resolve to the smallest global point index
    (member indices are kept sorted), so the result does not depend on the
    internal storage order.
    """
    if k_fps < 1:
        raise ValueError(f"k_fps must be >= 1, got {k_fps}")
    members = sp.point_indices
    pts = cloud.positions[members]
    m = members.size
    count = min(k_fps, m)

    d2c = np.einsum("ij,ij->i", pts - sp.centroid, pts - sp.centroid)
    seed = int(np.argmin(d2c))
    chosen = [seed]
    mind = np.einsum("ij,ij->i", pts - pts[seed], pts - pts[seed])
    for _ in range(1, count):
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        delta = pts - pts[nxt]
        np.minimum(mind, np.einsum("ij,ij->i", delta, delta), out=mind)
    return members[np.array(chosen, dtype=np.int64)]


def attach_fps_samples(superpoints: list[Superpoint], cloud: PointCloud, k_fps: int = 64) -> None:
    for sp in superpoints:
        sp.fps_samples = sample_fps(sp, cloud, k_fps)


# ---------------------------------------------------------------------------
# superpoint cache
# ---------------------------------------------------------------------------


def save_superpoint_cache(superpoints: list[Superpoint], path) -> None:
    doc = {
        "superpoints": [
            {"id": sp.id, "points": sp.point_indices.tolist()} for sp in superpoints
        ]
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_superpoint_cache(path, cloud: PointCloud) -> list[Superpoint]:
    with open(Path(path), "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    superpoints = []
    for entry in doc["superpoints"]:
        members = np.asarray(entry["points"], dtype=np.int64)
        superpoints.append(
            Superpoint(
                id=int(entry["id"]),
                point_indices=members,
                centroid=cloud.positions[members].mean(axis=0),
            )
        )
    superpoints.sort(key=lambda sp: sp.id)
    if [sp.id for sp in superpoints] != list(range(len(superpoints))):
        raise ValueError("superpoint cache ids must be contiguous from 0")
    return superpoints
