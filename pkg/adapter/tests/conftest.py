from __future__ import annotations

import json

import numpy as np
import pytest


POSE = {
    "width": 640,
    "height": 480,
    "intrinsics": {"fx": 500.0, "fy": 500.0, "cx": 320.0, "cy": 240.0},
    "extrinsics_w2c": list(np.eye(4).ravel()),
}

TINY_PLY = (
    b"ply\nformat ascii 1.0\nelement vertex 3\n"
    b"property float x\nproperty float y\nproperty float z\n"
    b"end_header\n0 0 1\n0.5 0 1\n0 0.5 1\n"
)


@pytest.fixture()
def frames_dir(tmp_path):
    root = tmp_path / "frames"
    root.mkdir()
    for name, content in (("frame_a", b"imageA"), ("frame_b", b"imageB")):
        (root / f"{name}.png").write_bytes(content)
        (root / f"{name}.pose.json").write_text(json.dumps(POSE))
    return root


@pytest.fixture()
def cloud_path(tmp_path):
    path = tmp_path / "cloud.ply"
    path.write_bytes(TINY_PLY)
    return path
