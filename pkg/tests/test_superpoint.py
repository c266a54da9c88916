from __future__ import annotations

import numpy as np
import pytest

from spinseg import superpoint as spm
from spinseg.errors import DegenerateNeighborhoodWarning
from spinseg.pcio import PointCloud


def grid_plane(n=8, z=0.0, offset=(0.0, 0.0)):
    xs, ys = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float))
    pts = np.column_stack([xs.ravel() + offset[0], ys.ravel() + offset[1],
                           np.full(n * n, z)])
    return pts


# ---------------------------------------------------------------------------
# normals
# ---------------------------------------------------------------------------


def test_normals_flat_plane_z():
    cloud = PointCloud(positions=grid_plane())
    normals = spm.estimate_normals(cloud, k=8)
    assert np.allclose(normals, [0, 0, 1], atol=1e-8)


def test_normals_plane_x_consistent_sign():
    pts = grid_plane()[:, [2, 0, 1]]  # plane x = 0
    normals = spm.estimate_normals(PointCloud(positions=pts), k=8)
    assert np.allclose(np.abs(normals[:, 0]), 1.0, atol=1e-8)
    assert len(set(np.sign(normals[:, 0]).tolist())) == 1  # one consistent sign


def test_normals_degenerate_fallback():
    pts = np.zeros((5, 3))
    with pytest.warns(DegenerateNeighborhoodWarning):
        normals = spm.estimate_normals(PointCloud(positions=pts), k=5)
    assert np.allclose(normals, [0, 0, 1])


# ---------------------------------------------------------------------------
# knn graph weights
# ---------------------------------------------------------------------------


def _two_point_cloud(colors=None, normals=None):
    pos = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    return PointCloud(positions=pos, colors=colors, normals=normals)


def test_graph_weight_identical_features():
    cloud = _two_point_cloud(
        colors=np.array([[10, 20, 30], [10, 20, 30]], dtype=np.uint8),
        normals=np.array([[0, 0, 1], [0, 0, 1]], dtype=float),
    )
    graph = spm.build_knn_graph(cloud, k=1, w_normal=1.0, w_color=0.2)
    assert graph.num_edges == 1
    assert graph.weights[0] == pytest.approx(0.0, abs=1e-12)


def test_graph_weight_perpendicular_normals():
    cloud = _two_point_cloud(normals=np.array([[0, 0, 1], [1, 0, 0]], dtype=float))
    graph = spm.build_knn_graph(cloud, k=1, w_normal=1.0, w_color=0.0)
    assert graph.weights[0] == pytest.approx(1.0, abs=1e-12)


def test_graph_weight_color_black_white():
    cloud = _two_point_cloud(
        colors=np.array([[0, 0, 0], [255, 255, 255]], dtype=np.uint8),
        normals=np.array([[0, 0, 1], [0, 0, 1]], dtype=float),
    )
    graph = spm.build_knn_graph(cloud, k=1, w_normal=0.0, w_color=1.0)
    assert graph.weights[0] == pytest.approx(1.0, rel=1e-6)


# ---------------------------------------------------------------------------
# segmentation
# ---------------------------------------------------------------------------


def test_single_plane_one_superpoint():
    cloud = PointCloud(positions=grid_plane(10))
    graph = spm.build_knn_graph(cloud, k=8)
    sps = spm.segment_superpoints(graph, cloud, kf=1000.0, min_size=1)
    assert len(sps) == 1
    assert len(sps[0]) == 100


def test_disconnected_planes_stay_separate():
    # two parallel planes far apart: kNN graph has no cross edges for small k
    a = grid_plane(6)
    b = grid_plane(6, z=100.0)
    cloud = PointCloud(positions=np.vstack([a, b]))
    graph = spm.build_knn_graph(cloud, k=4)
    ei, ej = graph.edges_i, graph.edges_j
    assert not (((ei < 36) & (ej >= 36)) | ((ej < 36) & (ei >= 36))).any()
    sps = spm.segment_superpoints(graph, cloud, kf=1000.0, min_size=1)
    assert len(sps) >= 2
    for sp in sps:
        side = set((sp.point_indices >= 36).tolist())
        assert len(side) == 1  # no superpoint spans both planes


def test_single_point_cloud():
    cloud = PointCloud(positions=np.zeros((1, 3)))
    graph = spm.build_knn_graph(
        cloud, k=4, normals=np.array([[0.0, 0.0, 1.0]])
    )
    sps = spm.segment_superpoints(graph, cloud, kf=0.05, min_size=30)
    assert len(sps) == 1 and len(sps[0]) == 1


def test_partition_and_determinism(rng):
    for _ in range(5):
        pts = rng.normal(size=(200, 3))
        cloud = PointCloud(positions=pts)
        graph = spm.build_knn_graph(cloud, k=6)
        sps1 = spm.segment_superpoints(graph, cloud, kf=0.5, min_size=5)
        sps2 = spm.segment_superpoints(graph, cloud, kf=0.5, min_size=5)
        all_indices = np.concatenate([sp.point_indices for sp in sps1])
        assert np.array_equal(np.sort(all_indices), np.arange(200))
        assert len(sps1) == len(sps2)
        for a, b in zip(sps1, sps2):
            assert np.array_equal(a.point_indices, b.point_indices)


def test_centroid_matches_mean():
    cloud = PointCloud(positions=grid_plane(5))
    graph = spm.build_knn_graph(cloud, k=4)
    (sp,) = spm.segment_superpoints(graph, cloud, kf=1000.0, min_size=1)
    assert np.allclose(sp.centroid, cloud.positions.mean(axis=0), atol=1e-9)


def test_connected_before_min_size_merge(rng):
    # each pre-merge component must be connected in the kNN graph
    pts = rng.normal(size=(150, 3)) * 2.0
    cloud = PointCloud(positions=pts)
    graph = spm.build_knn_graph(cloud, k=5)
    sps = spm.segment_superpoints(graph, cloud, kf=0.3, min_size=1)
    adjacency = {}
    for i, j in zip(graph.edges_i, graph.edges_j):
        adjacency.setdefault(int(i), set()).add(int(j))
        adjacency.setdefault(int(j), set()).add(int(i))
    for sp in sps:
        members = set(sp.point_indices.tolist())
        seen = {sp.point_indices[0].item()}
        stack = [sp.point_indices[0].item()]
        while stack:
            node = stack.pop()
            for nb in adjacency.get(node, ()):
                if nb in members and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        assert seen == members


# ---------------------------------------------------------------------------
# FPS
# ---------------------------------------------------------------------------


def _sp_of(cloud, indices):
    indices = np.asarray(indices, dtype=np.int64)
    return spm.Superpoint(
        id=0, point_indices=indices, centroid=cloud.positions[indices].mean(axis=0)
    )


def test_fps_returns_all_when_small():
    cloud = PointCloud(positions=np.array([[0.0, 0, 0], [1.0, 0, 0]]))
    sp = _sp_of(cloud, [0, 1])
    out = spm.sample_fps(sp, cloud, k_fps=64)
    assert sorted(out.tolist()) == [0, 1]


def test_fps_unit_square_opposite_corners():
    # exhaustive check: best 2-subset by max-min distance is a diagonal
    corners = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
    cloud = PointCloud(positions=corners)
    sp = _sp_of(cloud, [0, 1, 2, 3])
    out = spm.sample_fps(sp, cloud, k_fps=2)
    d = np.linalg.norm(corners[out[0]] - corners[out[1]])
    best = max(
        np.linalg.norm(corners[a] - corners[b])
        for a in range(4)
        for b in range(a + 1, 4)
    )
    assert d == pytest.approx(best)  # sqrt(2)


def test_fps_k1_nearest_centroid():
    pts = np.array([[0.0, 0, 0], [10, 0, 0], [4, 0, 0]])
    cloud = PointCloud(positions=pts)
    sp = _sp_of(cloud, [0, 1, 2])
    out = spm.sample_fps(sp, cloud, k_fps=1)
    assert out.tolist() == [2]  # centroid is (14/3, 0, 0); nearest is point 2


def test_fps_invariant_to_input_order(rng):
    pts = rng.normal(size=(40, 3))
    cloud = PointCloud(positions=pts)
    ordered = _sp_of(cloud, np.arange(40))
    shuffled = _sp_of(cloud, rng.permutation(40))
    a = spm.sample_fps(ordered, cloud, k_fps=10)
    b = spm.sample_fps(shuffled, cloud, k_fps=10)
    assert np.array_equal(a, b)
