"""End-to-end segmentation pipeline: dataset in, labeled 3D instances out."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import affinity as aff
from . import semantics, spectral, superpoint
from .config import PipelineConfig
from .errors import NoFeatureError
from .pcio import Dataset
from .project import OverlapTable, build_overlap_table
from .semantics import Instance3D, SceneVocabulary
from .spectral import ClusterResult
from .superpoint import Superpoint


@dataclass
class PipelineResult:
    superpoints: list[Superpoint]
    overlap: OverlapTable
    affinity: aff.AffinityMatrix
    clusters: ClusterResult
    vocabulary: SceneVocabulary
    instances: list[Instance3D]
    point_instance_ids: np.ndarray
    timings: dict[str, float] = field(default_factory=dict)
    factors: tuple[aff.AffinityMatrix, aff.AffinityMatrix, aff.AffinityMatrix] | None = None


def run_segmentation(
    dataset: Dataset,
    config: PipelineConfig | None = None,
    user_vocab: list[str] | None = None,
    superpoints: list[Superpoint] | None = None,
    keep_factors: bool = False,
) -> PipelineResult:
    """Run the full pipeline on a loaded dataset.

    ``user_vocab`` switches to open-vocabulary mode: labels are assigned from
    the given list instead of the grounded scene vocabulary. A precomputed
    superpoint partition may be supplied to skip segmentation.
    """
    config = config or PipelineConfig()
    config.validate()
    cloud = dataset.cloud
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    if superpoints is None:
        params = config.superpoint
        graph = superpoint.build_knn_graph(
            cloud, k=params.k, w_normal=params.w_normal, w_color=params.w_color
        )
        superpoints = superpoint.segment_superpoints(
            graph, cloud, kf=params.kf, min_size=params.min_size
        )
    superpoint.attach_fps_samples(superpoints, cloud, k_fps=config.k_fps)
    timings["superpoints"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    overlap = build_overlap_table(
        superpoints, dataset.frames, cloud,
        tau_depth=config.tau_depth,
        strict_iou=config.strict_iou_mode,
        threads=config.threads,
    )
    timings["overlap"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    labels = aff.vote_labels(overlap, k=config.top_k_masks)
    for sp in superpoints:
        sp.label = labels[sp.id]
        if sp.label is not None and sp.label in dataset.table:
            sp.label_embedding = dataset.table.vector(sp.label)
    am = aff.mask_coherence(overlap, tau_iou=config.tau_iou)
    as_ = aff.semantic_coherence(labels, dataset.table, tau_sim=config.tau_sim,
                                 size=len(superpoints))
    ac = aff.spatial_adjacency(superpoints, cloud)
    A = aff.combine(am, as_, ac)
    timings["affinity"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if config.clustering == "hierarchical":
        centroids = np.stack([sp.centroid for sp in superpoints])
        clusters = spectral.hierarchical_cluster(
            centroids, A,
            N_s=config.n_s,
            seed=config.seed,
            merge_threshold=config.tau_iou * config.tau_sim,
            bits=config.hilbert_bits,
            dense_limit=config.dense_limit,
        )
    else:
        clusters = spectral.spectral_cluster(A, seed=config.seed, dense_limit=config.dense_limit)
    timings["clustering"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    vocabulary = semantics.build_scene_vocab(dataset.frames)
    features = semantics.point_features(
        cloud, superpoints, visual=dataset.features, dim=dataset.table.dim
    )
    instances = []
    for cid, members in enumerate(clusters.clusters()):
        points = np.unique(
            np.concatenate([superpoints[sid].point_indices for sid in members])
        )
        inst = Instance3D(id=cid, point_indices=points, superpoint_ids=tuple(members))
        try:
            inst.embedding = semantics.instance_embedding(points, features)
        except NoFeatureError:
            inst.embedding = None
        instances.append(inst)
    vocab_labels = sorted(user_vocab) if user_vocab is not None else list(vocabulary.labels)
    semantics.assign_labels(instances, vocab_labels, dataset.table)

    point_ids = np.zeros(len(cloud), dtype=np.int64)
    for inst in instances:
        point_ids[inst.point_indices] = inst.id
    timings["semantics"] = time.perf_counter() - t0

    return PipelineResult(
        superpoints=superpoints,
        overlap=overlap,
        affinity=A,
        clusters=clusters,
        vocabulary=vocabulary,
        instances=instances,
        point_instance_ids=point_ids,
        timings=timings,
        factors=(am, as_, ac) if keep_factors else None,
    )
