"""Synthetic scenes with exact ground truth for the oracle-backed test harness.

Objects are surface-sampled primitives (box, plane, cylinder); per-camera 2D
masks are the pixel footprints of each object's projected points, dilated by
one pixel, so noise-free scenes have perfect grounding. Embedding tables are
one-hot with optional synonym entries at exact requested cosines. Generation
is fully deterministic given the spec seed.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation

from . import pcio
from .errors import EmptyFootprintWarning, InfeasibleCosinesError
from .evalkit import GroundTruthInstance, save_ground_truth
from .pcio import EmbeddingTable, Frame, Mask2D, PointCloud
from .project import project_points


@dataclass
class ObjectSpec:
    shape: str  # box | plane | cylinder
    label: str
    size: tuple[float, ...]  # box: (sx,sy,sz); plane: (sx,sy); cylinder: (r,h)
    position: tuple[float, float, float]
    color: tuple[int, int, int] = (200, 200, 200)
    yaw: float = 0.0

    def to_dict(self) -> dict:
        return {
            "shape": self.shape, "label": self.label, "size": list(self.size),
            "position": list(self.position), "color": list(self.color), "yaw": self.yaw,
        }


@dataclass
class CameraSpec:
    eye: tuple[float, float, float]
    target: tuple[float, float, float]
    fx: float = 260.0
    fy: float = 260.0
    width: int = 400
    height: int = 300

    def to_dict(self) -> dict:
        return {
            "eye": list(self.eye), "target": list(self.target),
            "fx": self.fx, "fy": self.fy, "width": self.width, "height": self.height,
        }


@dataclass
class SceneSpec:
    objects: list[ObjectSpec]
    cameras: list[CameraSpec]
    points_per_object: int = 1000
    noise_sigma: float = 0.0
    seed: int = 0
    label_noise: float = 0.0
    synonym_pairs: list[tuple[str, str, float]] = field(default_factory=list)
    emit_depth: bool = False

    def __post_init__(self):
        if not self.objects or not self.cameras:
            raise ValueError("a scene needs at least one object and one camera")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def to_dict(self) -> dict:
        return {
            "objects": [o.to_dict() for o in self.objects],
            "cameras": [c.to_dict() for c in self.cameras],
            "points_per_object": self.points_per_object,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "label_noise": self.label_noise,
            "synonym_pairs": [list(p) for p in self.synonym_pairs],
            "emit_depth": self.emit_depth,
        }

    @staticmethod
    def from_dict(doc: dict) -> "SceneSpec":
        return SceneSpec(
            objects=[
                ObjectSpec(
                    shape=o["shape"], label=o["label"], size=tuple(o["size"]),
                    position=tuple(o["position"]),
                    color=tuple(o.get("color", (200, 200, 200))),
                    yaw=float(o.get("yaw", 0.0)),
                )
                for o in doc["objects"]
            ],
            cameras=[
                CameraSpec(
                    eye=tuple(c["eye"]), target=tuple(c["target"]),
                    fx=float(c.get("fx", 260.0)), fy=float(c.get("fy", 260.0)),
                    width=int(c.get("width", 400)), height=int(c.get("height", 300)),
                )
                for c in doc["cameras"]
            ],
            points_per_object=int(doc.get("points_per_object", 1000)),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            seed=int(doc.get("seed", 0)),
            label_noise=float(doc.get("label_noise", 0.0)),
            synonym_pairs=[tuple(p) for p in doc.get("synonym_pairs", [])],
            emit_depth=bool(doc.get("emit_depth", False)),
        )

    @staticmethod
    def from_json(path) -> "SceneSpec":
        with open(Path(path), "r", encoding="utf-8") as fh:
            return SceneSpec.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# surface sampling
# ---------------------------------------------------------------------------


def _sample_box(rng: np.random.Generator, n: int, size) -> np.ndarray:
    sx, sy, sz = size
    areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
    faces = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=n)
    v = rng.uniform(-0.5, 0.5, size=n)
    pts = np.empty((n, 3))
    for f in range(6):
        m = faces == f
        axis, sign = divmod(f, 2)
        fixed = (0.5 if sign == 0 else -0.5)
        if axis == 0:
            pts[m] = np.column_stack([np.full(m.sum(), fixed * sx), u[m] * sy, v[m] * sz])
        elif axis == 1:
            pts[m] = np.column_stack([u[m] * sx, np.full(m.sum(), fixed * sy), v[m] * sz])
        else:
            pts[m] = np.column_stack([u[m] * sx, v[m] * sy, np.full(m.sum(), fixed * sz)])
    return pts


def _sample_plane(rng: np.random.Generator, n: int, size) -> np.ndarray:
    sx, sy = size
    return np.column_stack(
        [rng.uniform(-0.5, 0.5, n) * sx, rng.uniform(-0.5, 0.5, n) * sy, np.zeros(n)]
    )


def _sample_cylinder(rng: np.random.Generator, n: int, size) -> np.ndarray:
    r, h = size
    lateral = 2 * math.pi * r * h
    cap = math.pi * r * r
    part = rng.choice(3, size=n, p=np.array([lateral, cap, cap]) / (lateral + 2 * cap))
    phi = rng.uniform(0, 2 * math.pi, n)
    pts = np.empty((n, 3))
    m = part == 0
    pts[m] = np.column_stack(
        [r * np.cos(phi[m]), r * np.sin(phi[m]), rng.uniform(-0.5, 0.5, m.sum()) * h]
    )
    for which, zval in ((1, 0.5 * h), (2, -0.5 * h)):
        m = part == which
        rad = r * np.sqrt(rng.uniform(0, 1, m.sum()))
        pts[m] = np.column_stack(
            [rad * np.cos(phi[m]), rad * np.sin(phi[m]), np.full(m.sum(), zval)]
        )
    return pts


_SAMPLERS = {"box": _sample_box, "plane": _sample_plane, "cylinder": _sample_cylinder}


def _sample_object(obj: ObjectSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if obj.shape not in _SAMPLERS:
        raise ValueError(f"unknown shape {obj.shape!r}")
    pts = _SAMPLERS[obj.shape](rng, n, obj.size)
    if obj.yaw:
        c, s = math.cos(obj.yaw), math.sin(obj.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        pts = pts @ rot.T
    return pts + np.asarray(obj.position)


def look_at_extrinsics(eye, target) -> np.ndarray:
    """World-to-camera pose looking from eye to target (x right, y down, z forward)."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    if abs(forward @ up) > 0.999:
        up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    ext = np.eye(4)
    ext[0, :3], ext[1, :3], ext[2, :3] = right, down, forward
    ext[:3, 3] = -ext[:3, :3] @ eye
    return ext


# ---------------------------------------------------------------------------
# embedding tables
# ---------------------------------------------------------------------------


def synonym_table(labels: list[str], pairs: list[tuple[str, str, float]] = ()) -> EmbeddingTable:
    """One-hot table with selected label pairs realizing exact cosines.

    Each label owns one axis; for a pair (a, b, c) the vector of b becomes
    c * e_a + sqrt(1 - c^2) * e_b, so cos(emb_a, emb_b) == c exactly while all
    other pairs stay orthogonal. Pairs must not share labels.
    """
    labels = sorted(set(labels))
    axis = {lab: i for i, lab in enumerate(labels)}
    dim = len(labels)
    vectors = {lab: np.eye(dim)[axis[lab]].copy() for lab in labels}
    used: set[str] = set()
    for a, b, cos in pairs:
        if not (-1.0 <= cos <= 1.0):
            raise InfeasibleCosinesError(f"cosine {cos} outside [-1, 1] for pair ({a}, {b})")
        if a in used or b in used or a == b:
            raise InfeasibleCosinesError(f"overlapping constraint pair ({a}, {b})")
        if a not in axis or b not in axis:
            raise InfeasibleCosinesError(f"pair ({a}, {b}) references unknown labels")
        used |= {a, b}
        vec = np.zeros(dim)
        vec[axis[a]] = cos
        vec[axis[b]] = math.sqrt(max(0.0, 1.0 - cos * cos))
        vectors[b] = vec
    return EmbeddingTable(dim=dim, entries={lab: vectors[lab] for lab in labels})


# ---------------------------------------------------------------------------
# scene generation
# ---------------------------------------------------------------------------


def generate_scene(spec: SceneSpec, out_dir) -> list[GroundTruthInstance]:
    """Write a full dataset directory for the spec; returns the ground truth."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    positions_parts, colors_parts, gts = [], [], []
    offset = 0
    for oidx, obj in enumerate(spec.objects):
        rng = np.random.default_rng([spec.seed, oidx])
        pts = _sample_object(obj, spec.points_per_object, rng)
        if spec.noise_sigma > 0:
            pts = pts + rng.normal(0.0, spec.noise_sigma, size=pts.shape)
        positions_parts.append(pts)
        colors_parts.append(np.tile(np.asarray(obj.color, np.uint8), (len(pts), 1)))
        gts.append(
            GroundTruthInstance(
                id=oidx,
                point_indices=np.arange(offset, offset + len(pts)),
                label=obj.label,
            )
        )
        offset += len(pts)
    cloud = PointCloud(
        positions=np.concatenate(positions_parts),
        colors=np.concatenate(colors_parts),
    )
    pcio.save_point_cloud(cloud, out_dir / pcio.CLOUD_FILE)

    labels = sorted({o.label for o in spec.objects})
    noise_rng = np.random.default_rng([spec.seed, 999983])
    partner = {}
    for a, b, _ in spec.synonym_pairs:
        partner[a], partner[b] = b, a

    def noised(label: str) -> str:
        if spec.label_noise > 0 and noise_rng.random() < spec.label_noise:
            if label in partner:
                return partner[label]
            return labels[(labels.index(label) + 1) % len(labels)]
        return label

    frames = []
    seen_in = np.zeros(len(spec.objects), dtype=np.int64)
    for cidx, cam in enumerate(spec.cameras):
        ext = look_at_extrinsics(cam.eye, cam.target)
        frame = Frame(
            image_id=f"frame_{cidx:03d}",
            width=cam.width,
            height=cam.height,
            intrinsics=(cam.fx, cam.fy, cam.width / 2.0, cam.height / 2.0),
            extrinsics=ext,
        )
        uv, visible = project_points(cloud.positions, frame)
        masks = []
        depth = None
        if spec.emit_depth:
            depth = np.zeros((cam.height, cam.width), dtype=np.float64)
        for oidx in range(len(spec.objects)):
            member = gts[oidx].point_indices
            vis = visible[member]
            if not vis.any():
                continue
            seen_in[oidx] += 1
            sel = uv[member][vis]
            bitmap = np.zeros((cam.height, cam.width), dtype=bool)
            bitmap[sel[:, 1], sel[:, 0]] = True
            bitmap = binary_dilation(bitmap, structure=np.ones((3, 3), bool))
            masks.append(
                Mask2D(
                    rle=pcio.encode_rle(bitmap),
                    label=noised(spec.objects[oidx].label),
                    score=1.0,
                )
            )
        if spec.emit_depth:
            sel = np.flatnonzero(visible)
            x, y, z = cloud.positions[sel].T
            zc = ext[2, 0] * x + ext[2, 1] * y + ext[2, 2] * z + ext[2, 3]
            lin = uv[sel, 1] * cam.width + uv[sel, 0]
            flat = np.full(cam.height * cam.width, np.inf)
            np.minimum.at(flat, lin, zc)
            flat[~np.isfinite(flat)] = 0.0
            depth = flat.reshape(cam.height, cam.width)
        frames.append(
            Frame(
                image_id=frame.image_id,
                width=frame.width,
                height=frame.height,
                intrinsics=frame.intrinsics,
                extrinsics=frame.extrinsics,
                masks=tuple(masks),
                depth=depth,
            )
        )
    for oidx, count in enumerate(seen_in):
        if count == 0:
            warnings.warn(
                f"object {spec.objects[oidx].label!r} (#{oidx}) is invisible in every camera",
                EmptyFootprintWarning,
            )
    pcio.save_frames(frames, out_dir, depth=spec.emit_depth)

    table = synonym_table(labels, spec.synonym_pairs)
    pcio.save_embedding_table(table, out_dir / pcio.EMBEDDINGS_FILE)
    save_ground_truth(gts, out_dir / pcio.GT_FILE)
    return gts


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def boxes3_spec() -> SceneSpec:
    """Three separated unit boxes, four cameras, noise-free."""
    objects = [
        ObjectSpec("box", "crate", (1.0, 1.0, 1.0), (0.0, 0.0, 0.5), (220, 60, 60)),
        ObjectSpec("box", "bin", (1.0, 1.0, 1.0), (4.0, 0.0, 0.5), (60, 220, 60)),
        ObjectSpec("box", "carton", (1.0, 1.0, 1.0), (2.0, 3.5, 0.5), (60, 60, 220)),
    ]
    center = (2.0, 1.2, 0.5)
    cameras = []
    for k in range(4):
        ang = 2 * math.pi * k / 4 + 0.5
        eye = (center[0] + 9.0 * math.cos(ang), center[1] + 9.0 * math.sin(ang), 4.0)
        cameras.append(CameraSpec(eye=eye, target=center))
    return SceneSpec(objects=objects, cameras=cameras, points_per_object=1200,
                     noise_sigma=0.0, seed=42)


def planes2_spec() -> SceneSpec:
    """Two coplanar square patches separated by a clear gap."""
    objects = [
        ObjectSpec("plane", "mat", (2.0, 2.0), (0.0, 0.0, 0.0), (200, 120, 40)),
        ObjectSpec("plane", "rug", (2.0, 2.0), (3.0, 0.0, 0.0), (40, 120, 200)),
    ]
    cameras = [
        CameraSpec(eye=(1.5, -4.0, 4.5), target=(1.5, 0.0, 0.0)),
        CameraSpec(eye=(1.5, 4.0, 4.5), target=(1.5, 0.0, 0.0)),
        CameraSpec(eye=(-3.0, 0.0, 5.0), target=(1.5, 0.0, 0.0)),
    ]
    return SceneSpec(objects=objects, cameras=cameras, points_per_object=1500,
                     noise_sigma=0.0, seed=7)


def cluttered8_spec() -> SceneSpec:
    """Eight objects in four close pairs with related labels; one camera per pair.

    Each pair sits along a tangential axis with its own camera looking down
    that axis, so the rear object's projection nests inside the front object's
    mask there. Small gaps keep superpoints object-pure while remaining
    spatially adjacent, and synonym labels at cosine 0.5 make the semantic
    gate the only thing preventing cross-object merges. Two pairs are boxes,
    two are planar patches at grazing view. Includes 5% mask label noise.
    """
    centers = [(3.5, 3.5), (-3.5, 3.5), (-3.5, -3.5), (3.5, -3.5)]
    box_pairs = [("mug", "cup"), ("chair", "stool")]
    plane_pairs = [("table", "desk"), ("lamp", "light")]
    colors = [(220, 60, 60), (60, 220, 60), (60, 60, 220), (220, 220, 60),
              (220, 60, 220), (60, 220, 220), (160, 100, 60), (100, 160, 60)]
    objects = []
    cameras = []
    for pidx, (front, back) in enumerate(box_pairs):
        cx, cy = centers[pidx]
        norm = math.hypot(cx, cy)
        ux, uy = -cy / norm, cx / norm  # tangential: no camera ray hits another pair
        yaw = math.atan2(uy, ux)
        # 0.24 m face gap: below the FPS adjacency threshold, above the k-NN reach
        objects.append(
            ObjectSpec("box", front, (1.6, 1.6, 1.6),
                       (cx + 0.92 * ux, cy + 0.92 * uy, 0.8), colors[2 * pidx], yaw=yaw)
        )
        objects.append(
            ObjectSpec("box", back, (0.8, 0.8, 0.8),
                       (cx - 0.52 * ux, cy - 0.52 * uy, 0.4), colors[2 * pidx + 1], yaw=yaw)
        )
        # narrow frustum: only this pair is visible, distant pairs stay out of frame
        cameras.append(
            CameraSpec(eye=(cx + 9.0 * ux, cy + 9.0 * uy, 0.8),
                       target=(cx - 0.52 * ux, cy - 0.52 * uy, 0.4),
                       fx=300.0, fy=300.0, width=96, height=96)
        )
    for k, (front, back) in enumerate(plane_pairs):
        pidx = 2 + k
        cx, cy = centers[pidx]
        norm = math.hypot(cx, cy)
        ux, uy = -cy / norm, cx / norm
        yaw = math.atan2(uy, ux)
        # grazing camera: the lower rear patch projects inside the front patch
        objects.append(
            ObjectSpec("plane", front, (2.4, 2.4),
                       (cx + 1.35 * ux, cy + 1.35 * uy, 1.0), colors[2 * pidx], yaw=yaw)
        )
        objects.append(
            ObjectSpec("plane", back, (1.6, 1.6),
                       (cx - 0.95 * ux, cy - 0.95 * uy, 0.7), colors[2 * pidx + 1], yaw=yaw)
        )
        cameras.append(
            CameraSpec(eye=(cx + 9.0 * ux, cy + 9.0 * uy, 2.0),
                       target=(cx - 0.95 * ux, cy - 0.95 * uy, 0.7),
                       fx=300.0, fy=300.0, width=96, height=96)
        )
    for k in range(4):  # elevated side views for coverage, 45 deg off every pair axis
        ang = 2 * math.pi * k / 4
        cameras.append(
            CameraSpec(eye=(16.0 * math.cos(ang), 16.0 * math.sin(ang), 6.0),
                       target=(0.0, 0.0, 0.75))
        )
    pairs = [(a, b, 0.5) for a, b in box_pairs + plane_pairs]
    return SceneSpec(objects=objects, cameras=cameras, points_per_object=2500,
                     noise_sigma=0.0, seed=3, label_noise=0.05, synonym_pairs=pairs)


def grid_scene(
    num_boxes: int = 48,
    points_total: int = 100_000,
    num_cameras: int = 20,
    seed: int = 7,
) -> SceneSpec:
    """A floor plus a grid of boxes; sized for the performance target."""
    side = math.ceil(math.sqrt(num_boxes + 1))
    spacing = 2.5
    objects = [
        ObjectSpec("plane", "floor", (side * spacing + 2, side * spacing + 2),
                   (0.0, 0.0, 0.0), (128, 128, 128))
    ]
    placed = 0
    for gy in range(side):
        for gx in range(side):
            if placed >= num_boxes:
                break
            if (gx, gy) == (side // 2, side // 2):
                continue  # keep the center open for camera targets
            x = (gx - (side - 1) / 2) * spacing
            y = (gy - (side - 1) / 2) * spacing
            objects.append(
                ObjectSpec("box", f"box_{placed:02d}", (1.0, 1.0, 1.0), (x, y, 0.5),
                           (50 + (placed * 37) % 200, 50 + (placed * 73) % 200,
                            50 + (placed * 17) % 200))
            )
            placed += 1
    radius = side * spacing * 0.9
    cameras = [
        CameraSpec(
            eye=(radius * math.cos(2 * math.pi * k / num_cameras),
                 radius * math.sin(2 * math.pi * k / num_cameras),
                 7.0),
            target=(0.0, 0.0, 0.5),
        )
        for k in range(num_cameras)
    ]
    return SceneSpec(objects=objects, cameras=cameras,
                     points_per_object=points_total // len(objects),
                     noise_sigma=0.0, seed=seed)


PRESETS = {
    "boxes3": boxes3_spec,
    "planes2": planes2_spec,
    "cluttered8": cluttered8_spec,
    "grid48": grid_scene,
}
