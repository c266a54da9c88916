"""Scene vocabulary, point/instance embeddings, label assignment and queries.

Point features fuse an optional per-point visual feature matrix with the
superpoint's voted-label text embedding by mean pooling, renormalized so all
downstream dot products are cosines. Instances inherit the normalized mean of
their members' nonzero features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimMismatchError, NoFeatureError, UnknownLabelError
from .pcio import EmbeddingTable, FeatureMatrix, Frame, PointCloud
from .superpoint import Superpoint

UNKNOWN_LABEL = "unknown"


@dataclass(frozen=True)
class SceneVocabulary:
    """Unique grounded labels across all frames, with per-label frame counts."""

    labels: tuple[str, ...]
    frame_counts: dict[str, int]

    def __contains__(self, label: str) -> bool:
        return label in self.frame_counts

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class Instance3D:
    id: int
    point_indices: np.ndarray
    label: str = UNKNOWN_LABEL
    confidence: float = 0.0
    embedding: np.ndarray | None = None
    superpoint_ids: tuple[int, ...] = ()


def build_scene_vocab(frames: list[Frame]) -> SceneVocabulary:
    """Union of all mask labels across frames, sorted, with frame counts."""
    counts: dict[str, int] = {}
    for frame in frames:
        seen = {m.label for m in frame.masks}
        for label in seen:
            counts[label] = counts.get(label, 0) + 1
    return SceneVocabulary(labels=tuple(sorted(counts)), frame_counts=counts)


def point_features(
    cloud: PointCloud,
    superpoints: list[Superpoint],
    visual: FeatureMatrix | None = None,
    dim: int | None = None,
) -> np.ndarray:
    """Per-point unit feature vectors (or zero where nothing is known).

    With both a visual feature and a labeled superpoint, the point gets the
    renormalized mean of the two; with only one source it gets that source
    (visual renormalized); with neither, a zero vector.
    """
    if dim is None:
        if visual is not None:
            dim = visual.dim
        else:
            for sp in superpoints:
                if sp.label_embedding is not None:
                    dim = sp.label_embedding.shape[0]
                    break
    if dim is None:
        raise DimMismatchError("feature dimensionality unknown: no visual features, no labels")
    if visual is not None:
        if visual.dim != dim:
            raise DimMismatchError(f"visual dim {visual.dim} != embedding dim {dim}")
        if visual.rows != len(cloud):
            raise DimMismatchError(f"{visual.rows} feature rows vs {len(cloud)} points")

    out = np.zeros((len(cloud), dim), dtype=np.float32)
    vis = None
    if visual is not None:
        vis = visual.data.astype(np.float64)
        vis_norm = np.linalg.norm(vis, axis=1)

    for sp in superpoints:
        idx = sp.point_indices
        fq = sp.label_embedding
        if vis is None:
            if fq is not None:
                out[idx] = fq.astype(np.float32)
            continue
        has_vis = vis_norm[idx] > 0
        if fq is None:
            sel = idx[has_vis]
            if sel.size:
                out[sel] = (vis[sel] / vis_norm[sel, None]).astype(np.float32)
        else:
            sel = idx[has_vis]
            if sel.size:
                fused = (vis[sel] + fq[None, :]) / 2.0
                norms = np.linalg.norm(fused, axis=1)
                norms = np.where(norms == 0, 1.0, norms)
                out[sel] = (fused / norms[:, None]).astype(np.float32)
            rest = idx[~has_vis]
            if rest.size:
                out[rest] = fq.astype(np.float32)
    return out


def instance_embedding(point_indices: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Normalized mean of the nonzero member features."""
    member = features[np.asarray(point_indices, dtype=np.int64)].astype(np.float64)
    norms = np.linalg.norm(member, axis=1)
    nonzero = member[norms > 0]
    if nonzero.shape[0] == 0:
        raise NoFeatureError("all member features are zero")
    mean = nonzero.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise NoFeatureError("member features cancel to zero")
    return mean / norm


def assign_labels(
    instances: list[Instance3D],
    vocab: list[str],
    table: EmbeddingTable,
) -> list[Instance3D]:
    """Label each instance with the vocabulary entry of highest cosine similarity.

    Ties break lexicographically; confidence is the winning cosine clamped to
    [0, 1]. Instances without an embedding keep the "unknown" sentinel at
    confidence 0.
    """
    vocab = sorted(vocab)
    missing = [lab for lab in vocab if lab not in table]
    if missing:
        raise UnknownLabelError(f"vocabulary labels missing from the table: {missing}")
    if vocab:
        emb = np.stack([table.vector(lab) for lab in vocab])
    for inst in instances:
        if inst.embedding is None or not vocab:
            inst.label = UNKNOWN_LABEL
            inst.confidence = 0.0
            continue
        cos = emb @ inst.embedding
        best = float(cos.max())
        winner = min(lab for lab, c in zip(vocab, cos) if c == best)
        inst.label = winner
        inst.confidence = float(np.clip(best, 0.0, 1.0))
    return instances


def query(
    instances: list[Instance3D],
    query_embedding: np.ndarray,
    top_k: int = 1,
) -> list[tuple[Instance3D, float]]:
    """Rank instances by cosine similarity to a query embedding."""
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    q = np.asarray(query_embedding, dtype=np.float64)
    scored = []
    for inst in instances:
        s = float(q @ inst.embedding) if inst.embedding is not None else -np.inf
        scored.append((inst, s))
    scored.sort(key=lambda t: (-t[1], t[0].id))
    return scored[:top_k]


# ---------------------------------------------------------------------------
# final output serialization
# ---------------------------------------------------------------------------


def save_instances(instances: list[Instance3D], vocabulary: list[str], path) -> None:
    doc = {
        "vocabulary": list(vocabulary),
        "instances": [
            {
                "id": inst.id,
                "label": inst.label,
                "confidence": inst.confidence,
                "points": inst.point_indices.tolist(),
            }
            for inst in instances
        ],
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_instances(path) -> tuple[list[Instance3D], list[str]]:
    with open(Path(path), "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    instances = [
        Instance3D(
            id=int(e["id"]),
            point_indices=np.asarray(e["points"], dtype=np.int64),
            label=e.get("label", UNKNOWN_LABEL),
            confidence=float(e.get("confidence", 1.0)),
        )
        for e in doc["instances"]
    ]
    return instances, list(doc.get("vocabulary", []))
