"""Assemble a full interchange dataset from posed images plus model services.

Input layout: a frames directory with image files and pose sidecars
(``<stem>.pose.json`` holding width/height/intrinsics/extrinsics_w2c), plus a
reconstructed point cloud PLY. Per-image service calls may run concurrently;
all file writes happen serially afterwards.
"""

from __future__ import annotations

import json
import shutil
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import client
from .errors import MissingPoseError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _find_images(frames_dir: Path) -> list[Path]:
    images = [p for p in sorted(frames_dir.iterdir())
              if p.suffix.lower() in IMAGE_SUFFIXES]
    if not images:
        raise FileNotFoundError(f"no images found in {frames_dir}")
    return images


def _load_pose(image_path: Path) -> dict:
    pose_path = image_path.parent / (image_path.stem + ".pose.json")
    if not pose_path.exists():
        raise MissingPoseError(f"frame {image_path.name!r} has no pose sidecar {pose_path.name!r}")
    with open(pose_path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _process_image(image_path: Path, assistant_url, grounder_url):
    response = client.list_objects(image_path, endpoint=assistant_url)
    masks = client.ground(image_path, list(response.parsed_labels), endpoint=grounder_url)
    return response, masks


def export_dataset(
    frames_dir,
    cloud_path,
    out_dir,
    assistant_url: str | None = None,
    grounder_url: str | None = None,
    embed_url: str | None = None,
    concurrency: int = 4,
) -> Path:
    """Build and write the dataset directory; returns its path."""
    frames_dir = Path(frames_dir)
    out_dir = Path(out_dir)
    images = _find_images(frames_dir)
    poses = [_load_pose(p) for p in images]  # fail fast on missing poses

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(
            pool.map(lambda p: _process_image(p, assistant_url, grounder_url), images)
        )

    grounded_labels: list[str] = []
    for _, masks in results:
        for mask in masks:
            if mask["label"] not in grounded_labels:
                grounded_labels.append(mask["label"])
    if not grounded_labels:
        warnings.warn("no labels were grounded in any frame; dataset has empty masks")

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(exist_ok=True)
    shutil.copyfile(Path(cloud_path), out_dir / "cloud.ply")

    entries = []
    for image_path, pose, (_, masks) in zip(images, poses, results):
        masks_rel = f"masks/{image_path.stem}.json"
        with open(out_dir / masks_rel, "w", encoding="utf-8") as fh:
            json.dump({"masks": masks}, fh, sort_keys=True)
        entries.append(
            {
                "image_id": image_path.stem,
                "width": int(pose["width"]),
                "height": int(pose["height"]),
                "intrinsics": pose["intrinsics"],
                "extrinsics_w2c": pose["extrinsics_w2c"],
                "masks_file": masks_rel,
            }
        )
    with open(out_dir / "frames.json", "w", encoding="utf-8") as fh:
        json.dump({"frames": entries}, fh, sort_keys=True, indent=1)

    if grounded_labels:
        table = client.embed_labels(sorted(grounded_labels), endpoint=embed_url)
    else:
        table = {"dim": 1, "entries": []}
    with open(out_dir / "embeddings.json", "w", encoding="utf-8") as fh:
        json.dump(table, fh, sort_keys=True)
    return out_dir
