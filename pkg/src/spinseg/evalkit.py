"""Instance segmentation evaluation: AP sweep with embedding-matched labels.

Predictions are grouped per ground-truth class by embedding similarity
(cosine >= tau_bert counts as the same class), greedily matched to unmatched
ground truth of that class by highest IoU at each threshold, and scored with
all-point interpolated average precision. AP averages IoU thresholds 0.50 to
0.95 in 0.05 steps; AP50/AP25 are the fixed-threshold variants.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BothEmptyError, UnknownLabelError
from .pcio import EmbeddingTable
from .semantics import Instance3D, UNKNOWN_LABEL

AP_SWEEP = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))  # 0.50 .. 0.95


@dataclass(frozen=True)
class GroundTruthInstance:
    id: int
    point_indices: np.ndarray
    label: str

    def __post_init__(self):
        idx = np.unique(np.asarray(self.point_indices, dtype=np.int64))
        if idx.size == 0:
            raise ValueError("ground-truth instance must contain at least one point")
        object.__setattr__(self, "point_indices", idx)


@dataclass
class EvalReport:
    ap: float
    ap50: float
    ap25: float
    per_class: dict[str, float] = field(default_factory=dict)
    per_threshold: dict[float, float] = field(default_factory=dict)
    per_group: dict[str, float] | None = None

    def to_json(self) -> dict:
        doc = {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap25": self.ap25,
            "per_class": self.per_class,
            "per_threshold": {f"{t:.2f}": v for t, v in self.per_threshold.items()},
        }
        if self.per_group is not None:
            doc["per_group"] = self.per_group
        return doc

    def __str__(self) -> str:
        lines = [
            f"{'metric':<12s} {'value':>8s}",
            f"{'AP':<12s} {self.ap:8.4f}",
            f"{'AP50':<12s} {self.ap50:8.4f}",
            f"{'AP25':<12s} {self.ap25:8.4f}",
        ]
        for label in sorted(self.per_class):
            lines.append(f"{'AP ' + label:<12s} {self.per_class[label]:8.4f}")
        if self.per_group:
            for group in sorted(self.per_group):
                lines.append(f"{'AP [' + group + ']':<12s} {self.per_group[group]:8.4f}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "ap"])
            for label in sorted(self.per_class):
                writer.writerow([label, self.per_class[label]])


def mask_iou_3d(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two point index sets."""
    a = np.unique(np.asarray(a, dtype=np.int64))
    b = np.unique(np.asarray(b, dtype=np.int64))
    if a.size == 0 and b.size == 0:
        raise BothEmptyError("IoU of two empty point sets is undefined")
    inter = np.intersect1d(a, b, assume_unique=True).size
    union = a.size + b.size - inter
    return inter / union


def label_correct(pred: str, gt: str, table: EmbeddingTable, tau_bert: float = 0.8) -> bool:
    """Whether a predicted label matches a ground-truth label by embedding cosine."""
    if pred not in table:
        raise UnknownLabelError(f"predicted label {pred!r} missing from the table")
    if gt not in table:
        raise UnknownLabelError(f"ground-truth label {gt!r} missing from the table")
    return float(table.vector(pred) @ table.vector(gt)) >= tau_bert


def _class_ap(
    preds: list[Instance3D],
    gts: list[GroundTruthInstance],
    threshold: float,
) -> float:
    """AP of one class at one IoU threshold; preds already filtered and sorted."""
    n_gt = len(gts)
    matched = [False] * n_gt
    tp = []
    for pred in preds:
        best_iou, best_idx = 0.0, -1
        for gi, gt in enumerate(gts):
            if matched[gi]:
                continue
            iou = mask_iou_3d(pred.point_indices, gt.point_indices)
            if iou >= threshold and iou > best_iou:
                best_iou, best_idx = iou, gi
        if best_idx >= 0:
            matched[best_idx] = True
            tp.append(1)
        else:
            tp.append(0)
    if not tp:
        return 0.0
    tp_arr = np.cumsum(tp)
    fp_arr = np.cumsum([1 - t for t in tp])
    precision = tp_arr / (tp_arr + fp_arr)
    recall = tp_arr / n_gt
    # all-point interpolation: area under the precision envelope
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = 0.0
    ap = 0.0
    for r, p in zip(recall, envelope):
        ap += (r - prev_recall) * p
        prev_recall = r
    return float(ap)


def average_precision(
    preds: list[Instance3D],
    gts: list[GroundTruthInstance],
    table: EmbeddingTable,
    thresholds: tuple[float, ...] = AP_SWEEP,
    tau_bert: float = 0.8,
    groups: dict[str, str] | None = None,
) -> EvalReport:
    """Class-wise AP over the threshold sweep, plus AP50/AP25.

    A prediction belongs to a ground-truth class when its label passes the
    embedding-similarity check against that class label. Predictions carrying
    the "unknown" sentinel never participate. ``groups`` optionally maps class
    labels to group names for a per-group breakdown.
    """
    classes = sorted({gt.label for gt in gts})
    usable = [p for p in preds if p.label != UNKNOWN_LABEL]
    usable.sort(key=lambda p: (-p.confidence, p.id))

    by_class: dict[str, list[Instance3D]] = {}
    gts_by_class: dict[str, list[GroundTruthInstance]] = {}
    for cls in classes:
        by_class[cls] = [p for p in usable if label_correct(p.label, cls, table, tau_bert)]
        gts_by_class[cls] = [gt for gt in gts if gt.label == cls]

    def sweep(threshold: float) -> dict[str, float]:
        return {
            cls: _class_ap(by_class[cls], gts_by_class[cls], threshold) for cls in classes
        }

    per_threshold: dict[float, float] = {}
    per_class_acc: dict[str, list[float]] = {cls: [] for cls in classes}
    for t in thresholds:
        class_aps = sweep(t)
        for cls, v in class_aps.items():
            per_class_acc[cls].append(v)
        per_threshold[t] = (
            float(sum(class_aps.values()) / len(classes)) if classes else 0.0
        )
    ap = float(sum(per_threshold.values()) / len(thresholds)) if classes else 0.0
    ap50 = (
        float(sum(sweep(0.50).values()) / len(classes)) if classes else 0.0
    )
    ap25 = (
        float(sum(sweep(0.25).values()) / len(classes)) if classes else 0.0
    )
    per_class = {
        cls: float(sum(vals) / len(vals)) if vals else 0.0
        for cls, vals in per_class_acc.items()
    }

    per_group = None
    if groups is not None:
        per_group = {}
        names = sorted(set(groups.values()))
        for name in names:
            members = [cls for cls in classes if groups.get(cls) == name]
            if members:
                per_group[name] = float(sum(per_class[c] for c in members) / len(members))
    return EvalReport(
        ap=ap, ap50=ap50, ap25=ap25,
        per_class=per_class, per_threshold=per_threshold, per_group=per_group,
    )


# ---------------------------------------------------------------------------
# ground-truth I/O
# ---------------------------------------------------------------------------


def load_ground_truth(path) -> list[GroundTruthInstance]:
    with open(Path(path), "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    gts = [
        GroundTruthInstance(
            id=int(e["id"]),
            point_indices=np.asarray(e["points"], dtype=np.int64),
            label=e["label"],
        )
        for e in doc["instances"]
    ]
    seen: set[int] = set()
    for gt in gts:
        pts = set(gt.point_indices.tolist())
        if seen & pts:
            raise ValueError("ground-truth instances must be pairwise disjoint")
        seen |= pts
    return gts


def save_ground_truth(gts: list[GroundTruthInstance], path) -> None:
    doc = {
        "instances": [
            {"id": gt.id, "label": gt.label, "points": gt.point_indices.tolist()}
            for gt in gts
        ]
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_groups(path) -> dict[str, str]:
    """Label -> group mapping file (JSON object)."""
    with open(Path(path), "r", encoding="utf-8") as fh:
        return {str(k): str(v) for k, v in json.load(fh).items()}
