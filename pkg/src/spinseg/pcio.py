"""Load, validate and write the on-disk interchange dataset.

A dataset directory contains:

* ``cloud.ply``        point cloud (binary little-endian or ASCII PLY)
* ``frames.json``      manifest of posed frames, referencing per-frame mask files
* ``embeddings.json``  label -> embedding vector table
* ``features.pvft``    optional per-point visual feature matrix
* ``gt_instances.json`` optional ground-truth instances (same schema as pipeline output)

Mask RLEs are column-major, counts alternating zero-runs/one-runs starting
with zeros (COCO uncompressed style). Extrinsics are world-to-camera.
Embedding vectors are unit-normalized at load so downstream dot products are
cosines. All loaded objects are immutable and safe to share across threads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    BadExtrinsicsError,
    CountMismatchError,
    DimMismatchError,
    DuplicateLabelError,
    MalformedPlyError,
    MissingEmbeddingTableError,
    MissingFieldError,
    MissingFileError,
    MissingMaskFileError,
    NonFiniteCoordinateError,
    SpinsegError,
    ZeroVectorError,
)

CLOUD_FILE = "cloud.ply"
MANIFEST_FILE = "frames.json"
EMBEDDINGS_FILE = "embeddings.json"
FEATURES_FILE = "features.pvft"
GT_FILE = "gt_instances.json"

_PVFT_MAGIC = b"PVFT"
_PVIM_MAGIC = b"PVIM"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointCloud:
    """Scene points with optional per-point colors and unit normals."""

    positions: np.ndarray  # (N, 3) float64, meters
    colors: np.ndarray | None = None  # (N, 3) uint8
    normals: np.ndarray | None = None  # (N, 3) float64, unit

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise MalformedPlyError(f"positions must be (N, 3) with N >= 1, got {pos.shape}")
        if not np.isfinite(pos).all():
            raise NonFiniteCoordinateError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "positions", _freeze(pos))
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.uint8)
            if col.shape != pos.shape:
                raise MalformedPlyError(f"colors shape {col.shape} != positions shape {pos.shape}")
            object.__setattr__(self, "colors", _freeze(col))
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=np.float64)
            if nrm.shape != pos.shape:
                raise MalformedPlyError(f"normals shape {nrm.shape} != positions shape {pos.shape}")
            norms = np.linalg.norm(nrm, axis=1)
            if not np.isfinite(nrm).all() or np.abs(norms - 1.0).max() > 1e-4:
                raise MalformedPlyError("normals must be finite unit vectors (norm 1 +/- 1e-4)")
            object.__setattr__(self, "normals", _freeze(nrm))

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class Mask2D:
    """One grounded 2D instance mask: uncompressed RLE plus label and score."""

    rle: np.ndarray  # run counts, column-major, zeros first
    label: str
    score: float = 1.0

    def __post_init__(self):
        counts = np.asarray(self.rle, dtype=np.int64)
        if counts.ndim != 1 or (counts < 0).any():
            raise CountMismatchError("RLE counts must be a flat list of non-negative integers")
        object.__setattr__(self, "rle", _freeze(counts))
        if not self.label:
            raise SpinsegError("mask label must be a non-empty string")
        if not (0.0 <= self.score <= 1.0):
            raise SpinsegError(f"mask score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class Frame:
    """A posed camera frame with its grounded masks and optional depth."""

    image_id: str
    width: int
    height: int
    intrinsics: tuple[float, float, float, float]  # fx, fy, cx, cy
    extrinsics: np.ndarray  # (4, 4) world-to-camera, row-major
    masks: tuple[Mask2D, ...] = ()
    depth: np.ndarray | None = None  # (H, W) float32 meters, 0 = no measurement

    def __post_init__(self):
        fx, fy, cx, cy = self.intrinsics
        if fx <= 0 or fy <= 0:
            raise BadExtrinsicsError(f"focal lengths must be positive, got fx={fx}, fy={fy}")
        ext = np.asarray(self.extrinsics, dtype=np.float64)
        if ext.shape != (4, 4):
            raise BadExtrinsicsError(f"extrinsics must be 4x4, got {ext.shape}")
        if not np.array_equal(ext[3], [0.0, 0.0, 0.0, 1.0]):
            raise BadExtrinsicsError(f"extrinsics bottom row must be (0,0,0,1), got {ext[3].tolist()}")
        rot = ext[:3, :3]
        if np.abs(rot @ rot.T - np.eye(3)).max() > 1e-5 or np.linalg.det(rot) < 0:
            raise BadExtrinsicsError("extrinsics rotation block is not a proper rotation")
        object.__setattr__(self, "extrinsics", _freeze(ext))
        for m in self.masks:
            if int(m.rle.sum()) != self.width * self.height:
                raise CountMismatchError(
                    f"frame {self.image_id!r}: RLE total {int(m.rle.sum())} != "
                    f"{self.width}x{self.height}"
                )
        if self.depth is not None:
            dep = np.asarray(self.depth, dtype=np.float32)
            if dep.shape != (self.height, self.width):
                raise CountMismatchError(
                    f"frame {self.image_id!r}: depth shape {dep.shape} != (H, W)"
                )
            object.__setattr__(self, "depth", _freeze(dep))


@dataclass(frozen=True)
class EmbeddingTable:
    """Label -> unit vector lookup; all vectors share one dimensionality."""

    dim: int
    entries: dict[str, np.ndarray]

    def __contains__(self, label: str) -> bool:
        return label in self.entries

    @property
    def labels(self) -> list[str]:
        return list(self.entries)

    def vector(self, label: str) -> np.ndarray:
        from .errors import UnknownLabelError

        try:
            return self.entries[label]
        except KeyError:
            raise UnknownLabelError(f"label {label!r} is not in the embedding table") from None


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-point visual features, row i aligned with point i."""

    data: np.ndarray  # (N, D) float32

    def __post_init__(self):
        dat = np.asarray(self.data, dtype=np.float32)
        if dat.ndim != 2:
            raise DimMismatchError(f"feature matrix must be 2-D, got shape {dat.shape}")
        if not np.isfinite(dat).all():
            raise NonFiniteCoordinateError("feature matrix contains non-finite values")
        object.__setattr__(self, "data", _freeze(dat))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# RLE
# ---------------------------------------------------------------------------


def decode_rle(counts, width: int, height: int) -> np.ndarray:
    """Decode column-major zeros-first run counts into an (H, W) bool bitmap."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 1 or (counts < 0).any():
        raise CountMismatchError("RLE counts must be flat non-negative integers")
    total = int(counts.sum())
    if total != width * height:
        raise CountMismatchError(f"RLE total {total} != {width}x{height}")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape((height, width), order="F")


def encode_rle(bitmap: np.ndarray) -> np.ndarray:
    """Encode an (H, W) bool bitmap into canonical column-major run counts."""
    flat = np.asarray(bitmap, dtype=bool).ravel(order="F")
    if flat.size == 0:
        raise CountMismatchError("cannot encode an empty bitmap")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds)
    if flat[0]:  # runs must start with a zero run
        counts = np.concatenate(([0], counts))
    return counts.astype(np.int64)


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _parse_ply_header(fh):
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise MalformedPlyError("missing 'ply' magic line")
    fmt = None
    elements = []  # (name, count, [(prop_name, np_type)])
    while True:
        line = fh.readline()
        if not line:
            raise MalformedPlyError("unexpected end of file inside header")
        tokens = line.decode("ascii", errors="replace").strip().split()
        if not tokens:
            continue
        if tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise MalformedPlyError(f"unsupported PLY format {tokens[1:]}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise MalformedPlyError(f"bad element line: {tokens}")
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise MalformedPlyError("property before any element")
            if tokens[1] == "list":
                elements[-1][2].append((tokens[-1], "list"))
            else:
                if tokens[1] not in _PLY_TYPES:
                    raise MalformedPlyError(f"unsupported property type {tokens[1]!r}")
                elements[-1][2].append((tokens[2], _PLY_TYPES[tokens[1]]))
        elif tokens[0] == "end_header":
            break
        else:
            raise MalformedPlyError(f"unrecognized header line: {' '.join(tokens)}")
    if fmt is None:
        raise MalformedPlyError("header has no format line")
    return fmt, elements


def load_point_cloud(path) -> PointCloud:
    """Read a PLY point cloud (float x,y,z; optional uchar RGB; optional float normals)."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"point cloud file not found: {path}")
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        vertex = None
        for name, count, props in elements:
            if name == "vertex":
                vertex = (count, props)
                break
            # skip a preceding element; only possible when its size is known
            if any(t == "list" for _, t in props):
                raise MalformedPlyError(f"cannot skip element {name!r} with list properties")
            if fmt == "ascii":
                for _ in range(count):
                    fh.readline()
            else:
                row = sum(np.dtype(t).itemsize for _, t in props)
                fh.seek(row * count, 1)
        if vertex is None:
            raise MalformedPlyError("no vertex element in PLY file")
        count, props = vertex
        if any(t == "list" for _, t in props):
            raise MalformedPlyError("list properties on the vertex element are unsupported")
        names = [n for n, _ in props]
        for required in ("x", "y", "z"):
            if required not in names:
                raise MissingFieldError(f"vertex element lacks property {required!r}")
        dtype = np.dtype([(n, ("<" + t if fmt != "ascii" else t)) for n, t in props])
        if count < 1:
            raise MalformedPlyError("vertex element must have at least one point")
        if fmt == "ascii":
            rows = []
            for _ in range(count):
                line = fh.readline()
                if not line:
                    raise MalformedPlyError("truncated ASCII vertex data")
                parts = line.split()
                if len(parts) != len(props):
                    raise MalformedPlyError(f"expected {len(props)} values per vertex line")
                rows.append(tuple(float(p) for p in parts))
            data = np.array(rows, dtype=dtype)
        else:
            raw = fh.read(dtype.itemsize * count)
            if len(raw) != dtype.itemsize * count:
                raise MalformedPlyError("truncated binary vertex data")
            data = np.frombuffer(raw, dtype=dtype)

    positions = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(np.float64)
    colors = None
    if all(c in names for c in ("red", "green", "blue")):
        colors = np.stack([data["red"], data["green"], data["blue"]], axis=1).astype(np.uint8)
    normals = None
    if all(c in names for c in ("nx", "ny", "nz")):
        normals = np.stack([data["nx"], data["ny"], data["nz"]], axis=1).astype(np.float64)
    return PointCloud(positions=positions, colors=colors, normals=normals)


def save_point_cloud(cloud: PointCloud, path) -> None:
    """Write a binary little-endian PLY with the properties present on the cloud."""
    path = Path(path)
    n = len(cloud)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    header += ["property float x", "property float y", "property float z"]
    if cloud.colors is not None:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    if cloud.normals is not None:
        fields += [("nx", "<f4"), ("ny", "<f4"), ("nz", "<f4")]
        header += ["property float nx", "property float ny", "property float nz"]
    header.append("end_header")
    data = np.empty(n, dtype=np.dtype(fields))
    data["x"], data["y"], data["z"] = cloud.positions.T.astype(np.float32)
    if cloud.colors is not None:
        data["red"], data["green"], data["blue"] = cloud.colors.T
    if cloud.normals is not None:
        data["nx"], data["ny"], data["nz"] = cloud.normals.T.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# Frames / masks / depth
# ---------------------------------------------------------------------------


def load_depth(path) -> np.ndarray:
    """Read a 16-bit grayscale PNG depth map in millimeters; returns float32 meters."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"depth file not found: {path}")
    img = Image.open(path)
    arr = np.asarray(img)
    if arr.dtype not in (np.uint16, np.int32):
        raise CountMismatchError(f"depth PNG must be 16-bit grayscale, got dtype {arr.dtype}")
    return (arr.astype(np.float32)) / 1000.0


def save_depth(depth_m: np.ndarray, path) -> None:
    """Write a float-meters depth map as 16-bit grayscale PNG in millimeters."""
    mm = np.clip(np.round(np.asarray(depth_m, dtype=np.float64) * 1000.0), 0, 65535)
    Image.fromarray(mm.astype(np.uint16)).save(Path(path))


def _load_masks_file(path) -> list[Mask2D]:
    path = Path(path)
    if not path.exists():
        raise MissingMaskFileError(f"masks file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [
        Mask2D(rle=m["rle"], label=m["label"], score=float(m.get("score", 1.0)))
        for m in doc["masks"]
    ]


def load_frames(manifest_path) -> list[Frame]:
    """Load the frame manifest and attach every referenced masks (and depth) file."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise MissingFileError(f"frame manifest not found: {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    base = manifest_path.parent
    frames = []
    for entry in doc["frames"]:
        intr = entry["intrinsics"]
        ext = np.asarray(entry["extrinsics_w2c"], dtype=np.float64)
        if ext.size != 16:
            raise BadExtrinsicsError("extrinsics_w2c must hold exactly 16 floats")
        masks = _load_masks_file(base / entry["masks_file"])
        depth = None
        if entry.get("depth_file"):
            depth = load_depth(base / entry["depth_file"])
        frames.append(
            Frame(
                image_id=str(entry["image_id"]),
                width=int(entry["width"]),
                height=int(entry["height"]),
                intrinsics=(float(intr["fx"]), float(intr["fy"]), float(intr["cx"]), float(intr["cy"])),
                extrinsics=ext.reshape(4, 4),
                masks=tuple(masks),
                depth=depth,
            )
        )
    return frames


def save_frames(frames: list[Frame], root, depth: bool = False) -> None:
    """Write frames.json plus masks/ (and optionally depth/) under ``root``."""
    root = Path(root)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    if depth:
        (root / "depth").mkdir(parents=True, exist_ok=True)
    entries = []
    for frame in frames:
        masks_rel = f"masks/{frame.image_id}.json"
        doc = {
            "masks": [
                {"label": m.label, "score": m.score, "rle": m.rle.tolist()}
                for m in frame.masks
            ]
        }
        with open(root / masks_rel, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
        entry = {
            "image_id": frame.image_id,
            "width": frame.width,
            "height": frame.height,
            "intrinsics": {
                "fx": frame.intrinsics[0],
                "fy": frame.intrinsics[1],
                "cx": frame.intrinsics[2],
                "cy": frame.intrinsics[3],
            },
            "extrinsics_w2c": frame.extrinsics.ravel().tolist(),
            "masks_file": masks_rel,
        }
        if depth and frame.depth is not None:
            depth_rel = f"depth/{frame.image_id}.png"
            save_depth(frame.depth, root / depth_rel)
            entry["depth_file"] = depth_rel
        entries.append(entry)
    with open(root / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump({"frames": entries}, fh, sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# Embedding table / feature matrix
# ---------------------------------------------------------------------------


def load_embedding_table(path) -> EmbeddingTable:
    """Load the label embedding table; vectors are unit-normalized in place."""
    path = Path(path)
    if not path.exists():
        raise MissingEmbeddingTableError(f"embedding table not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    dim = int(doc["dim"])
    entries: dict[str, np.ndarray] = {}
    for item in doc["entries"]:
        label = item["label"]
        vec = np.asarray(item["vector"], dtype=np.float64)
        if vec.shape != (dim,):
            raise DimMismatchError(f"label {label!r}: vector has dim {vec.shape}, table dim {dim}")
        if label in entries:
            raise DuplicateLabelError(f"duplicate label {label!r} in embedding table")
        norm = np.linalg.norm(vec)
        if not np.isfinite(norm) or norm == 0.0:
            raise ZeroVectorError(f"label {label!r}: cannot normalize zero/non-finite vector")
        entries[label] = _freeze(vec / norm)
    return EmbeddingTable(dim=dim, entries=entries)


def save_embedding_table(table: EmbeddingTable, path) -> None:
    doc = {
        "dim": table.dim,
        "entries": [
            {"label": label, "vector": vec.tolist()}
            for label, vec in table.entries.items()
        ],
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_feature_matrix(path) -> FeatureMatrix:
    """Read the PVFT binary: magic, u32 N, u32 D, then N*D little-endian float32."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"feature matrix not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _PVFT_MAGIC:
            raise DimMismatchError(f"bad feature matrix magic {magic!r}")
        n, d = struct.unpack("<II", fh.read(8))
        raw = fh.read(4 * n * d)
        if len(raw) != 4 * n * d:
            raise DimMismatchError("truncated feature matrix payload")
        data = np.frombuffer(raw, dtype="<f4").reshape(n, d)
    return FeatureMatrix(data=data)


def save_feature_matrix(features: FeatureMatrix, path) -> None:
    with open(Path(path), "wb") as fh:
        fh.write(_PVFT_MAGIC)
        fh.write(struct.pack("<II", features.rows, features.dim))
        fh.write(features.data.astype("<f4").tobytes())


def save_instance_map(instance_ids: np.ndarray, path) -> None:
    """Write the point -> instance id map (PVIM: magic, u32 N, then u32 per point)."""
    ids = np.asarray(instance_ids, dtype="<u4")
    with open(Path(path), "wb") as fh:
        fh.write(_PVIM_MAGIC)
        fh.write(struct.pack("<I", ids.size))
        fh.write(ids.tobytes())


def load_instance_map(path) -> np.ndarray:
    with open(Path(path), "rb") as fh:
        magic = fh.read(4)
        if magic != _PVIM_MAGIC:
            raise DimMismatchError(f"bad instance map magic {magic!r}")
        (n,) = struct.unpack("<I", fh.read(4))
        return np.frombuffer(fh.read(4 * n), dtype="<u4").astype(np.int64)


# ---------------------------------------------------------------------------
# Dataset bundle + validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    root: Path
    cloud: PointCloud
    frames: list[Frame]
    table: EmbeddingTable
    features: FeatureMatrix | None = None


def load_dataset(root) -> Dataset:
    """Load a full dataset directory (cloud, frames, table, optional features)."""
    root = Path(root)
    cloud = load_point_cloud(root / CLOUD_FILE)
    frames = load_frames(root / MANIFEST_FILE)
    table = load_embedding_table(root / EMBEDDINGS_FILE)
    features = None
    feat_path = root / FEATURES_FILE
    if feat_path.exists():
        features = load_feature_matrix(feat_path)
        if features.rows != len(cloud):
            raise DimMismatchError(
                f"feature matrix has {features.rows} rows but cloud has {len(cloud)} points"
            )
    return Dataset(root=root, cloud=cloud, frames=frames, table=table, features=features)


@dataclass
class ReportEntry:
    severity: str  # "error" | "warning"
    code: str
    path: str
    message: str


@dataclass
class ValidationReport:
    entries: list[ReportEntry] = field(default_factory=list)

    def add_error(self, code: str, path, message: str) -> None:
        self.entries.append(ReportEntry("error", code, str(path), message))

    def add_warning(self, code: str, path, message: str) -> None:
        self.entries.append(ReportEntry("warning", code, str(path), message))

    @property
    def errors(self) -> list[ReportEntry]:
        return [e for e in self.entries if e.severity == "error"]

    @property
    def warnings(self) -> list[ReportEntry]:
        return [e for e in self.entries if e.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "entries": [
                {"severity": e.severity, "code": e.code, "path": e.path, "message": e.message}
                for e in self.entries
            ],
        }

    def __str__(self) -> str:
        if not self.entries:
            return "dataset OK (no errors, no warnings)"
        lines = []
        for e in self.entries:
            lines.append(f"{e.severity.upper():7s} {e.code:22s} {e.path}: {e.message}")
        lines.append(f"{len(self.errors)} error(s), {len(self.warnings)} warning(s)")
        return "\n".join(lines)


def validate_dataset(root) -> ValidationReport:
    """Check every file of a dataset directory; never raises on bad data."""
    root = Path(root)
    report = ValidationReport()

    cloud = None
    cloud_path = root / CLOUD_FILE
    try:
        cloud = load_point_cloud(cloud_path)
    except SpinsegError as exc:
        report.add_error(exc.code, cloud_path, str(exc))
    except Exception as exc:  # malformed beyond our own checks
        report.add_error("MalformedPly", cloud_path, str(exc))

    frames: list[Frame] = []
    manifest_path = root / MANIFEST_FILE
    try:
        frames = load_frames(manifest_path)
    except SpinsegError as exc:
        report.add_error(exc.code, manifest_path, str(exc))
    except Exception as exc:
        report.add_error("MalformedManifest", manifest_path, str(exc))

    table = None
    table_path = root / EMBEDDINGS_FILE
    try:
        table = load_embedding_table(table_path)
    except SpinsegError as exc:
        report.add_error(exc.code, table_path, str(exc))
    except Exception as exc:
        report.add_error("MalformedTable", table_path, str(exc))

    feat_path = root / FEATURES_FILE
    if feat_path.exists():
        try:
            features = load_feature_matrix(feat_path)
            if cloud is not None and features.rows != len(cloud):
                report.add_error(
                    "DimMismatch",
                    feat_path,
                    f"{features.rows} feature rows vs {len(cloud)} points",
                )
        except SpinsegError as exc:
            report.add_error(exc.code, feat_path, str(exc))

    if table is not None:
        seen: set[str] = set()
        for frame in frames:
            for mask in frame.masks:
                if mask.label not in table and mask.label not in seen:
                    seen.add(mask.label)
                    report.add_warning(
                        "UnembeddedLabel",
                        manifest_path,
                        f"mask label {mask.label!r} is missing from the embedding table",
                    )

    gt_path = root / GT_FILE
    if gt_path.exists():
        try:
            with open(gt_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            for inst in doc.get("instances", []):
                if table is not None and inst["label"] not in table:
                    report.add_warning(
                        "UnembeddedLabel",
                        gt_path,
                        f"ground-truth label {inst['label']!r} missing from the table",
                    )
        except Exception as exc:
            report.add_error("MalformedGroundTruth", gt_path, str(exc))

    return report
