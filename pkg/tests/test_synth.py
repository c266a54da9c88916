from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from spinseg import pcio, synth
from spinseg.errors import EmptyFootprintWarning, InfeasibleCosinesError

from oracles import project_point_scalar


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def test_boxes3_ground_truth(boxes3_dataset):
    gts = json.loads((Path(boxes3_dataset) / pcio.GT_FILE).read_text())["instances"]
    assert len(gts) == 3
    all_points = sorted(p for g in gts for p in g["points"])
    cloud = pcio.load_point_cloud(Path(boxes3_dataset) / pcio.CLOUD_FILE)
    assert all_points == list(range(len(cloud)))  # disjoint cover


def test_boxes3_objects_visible_in_two_cameras(boxes3_dataset):
    # count per-label mask occurrences across frames, verified against the
    # independent scalar projection oracle
    ds = pcio.load_dataset(boxes3_dataset)
    gts = json.loads((Path(boxes3_dataset) / pcio.GT_FILE).read_text())["instances"]
    per_label = {}
    for frame in ds.frames:
        for m in frame.masks:
            per_label[m.label] = per_label.get(m.label, 0) + 1
    assert all(count >= 2 for count in per_label.values())
    for g in gts:
        visible_frames = 0
        for frame in ds.frames:
            pts = ds.cloud.positions[np.asarray(g["points"][:50])]
            if any(project_point_scalar(p, frame) is not None for p in pts):
                visible_frames += 1
        assert visible_frames >= 2


def test_noiseless_masks_contain_all_projected_points(tmp_path):
    spec = synth.SceneSpec(
        objects=[synth.ObjectSpec("plane", "mat", (2.0, 2.0), (0.0, 0.0, 0.0))],
        cameras=[synth.CameraSpec(eye=(0.0, -3.0, 3.0), target=(0.0, 0.0, 0.0))],
        points_per_object=500,
        seed=1,
    )
    synth.generate_scene(spec, tmp_path)
    ds = pcio.load_dataset(tmp_path)
    frame = ds.frames[0]
    bitmap = pcio.decode_rle(frame.masks[0].rle, frame.width, frame.height)
    from spinseg.project import project_points

    uv, vis = project_points(ds.cloud.positions, frame)
    assert vis.all()
    assert bitmap[uv[:, 1], uv[:, 0]].all()  # overlap scores are exactly 1.0


def test_generation_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    synth.generate_scene(synth.boxes3_spec(), a)
    synth.generate_scene(synth.boxes3_spec(), b)
    assert _tree_digest(a) == _tree_digest(b)


def test_empty_footprint_warns(tmp_path):
    spec = synth.SceneSpec(
        objects=[synth.ObjectSpec("box", "hidden", (1.0, 1.0, 1.0), (0.0, 0.0, -100.0))],
        cameras=[synth.CameraSpec(eye=(0.0, -5.0, 2.0), target=(0.0, 0.0, 50.0))],
        points_per_object=100,
        seed=0,
    )
    with pytest.warns(EmptyFootprintWarning):
        synth.generate_scene(spec, tmp_path)


def test_depth_maps_emitted_and_consistent(tmp_path):
    spec = synth.SceneSpec(
        objects=[synth.ObjectSpec("box", "b", (1.0, 1.0, 1.0), (0.0, 0.0, 0.5))],
        cameras=[synth.CameraSpec(eye=(0.0, -5.0, 1.0), target=(0.0, 0.0, 0.5))],
        points_per_object=400,
        seed=2,
        emit_depth=True,
    )
    synth.generate_scene(spec, tmp_path)
    ds = pcio.load_dataset(tmp_path)
    frame = ds.frames[0]
    assert frame.depth is not None
    # the front face of the box is ~4.5 m away; depth values must be plausible
    measured = frame.depth[frame.depth > 0]
    assert measured.min() == pytest.approx(4.5, abs=0.3)


def test_label_noise_flips_some_masks(tmp_path):
    spec = synth.cluttered8_spec()
    synth.generate_scene(spec, tmp_path)
    ds = pcio.load_dataset(tmp_path)
    true_labels = {o.label for o in spec.objects}
    stored = [m.label for f in ds.frames for m in f.masks]
    assert set(stored) <= true_labels  # noise only swaps within the label set


def test_shapes_cover_box_plane_cylinder(tmp_path):
    spec = synth.SceneSpec(
        objects=[
            synth.ObjectSpec("box", "b", (1.0, 1.0, 1.0), (0.0, 0.0, 0.5)),
            synth.ObjectSpec("plane", "p", (2.0, 2.0), (4.0, 0.0, 0.0)),
            synth.ObjectSpec("cylinder", "c", (0.5, 1.2), (-4.0, 0.0, 0.6)),
        ],
        cameras=[
            synth.CameraSpec(eye=(0.0, -9.0, 4.0), target=(0.0, 0.0, 0.5)),
            synth.CameraSpec(eye=(0.0, 9.0, 4.0), target=(0.0, 0.0, 0.5)),
        ],
        points_per_object=600,
        seed=5,
    )
    gts = synth.generate_scene(spec, tmp_path)
    assert len(gts) == 3
    cloud = pcio.load_point_cloud(tmp_path / pcio.CLOUD_FILE)
    # cylinder points lie within radius of the axis
    cyl = cloud.positions[gts[2].point_indices]
    r = np.hypot(cyl[:, 0] + 4.0, cyl[:, 1])
    assert r.max() <= 0.5 + 1e-6


def test_scene_spec_json_round_trip(tmp_path):
    spec = synth.cluttered8_spec()
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    loaded = synth.SceneSpec.from_json(path)
    assert loaded.to_dict() == spec.to_dict()


# ---------------------------------------------------------------------------
# synonym tables
# ---------------------------------------------------------------------------


def test_synonym_pair_exact_cosine():
    table = synth.synonym_table(["sofa", "couch"], [("sofa", "couch", 0.9)])
    cos = float(table.vector("sofa") @ table.vector("couch"))
    assert cos == pytest.approx(0.9, abs=1e-9)


def test_synonym_unrelated_orthogonal():
    table = synth.synonym_table(["a", "b", "c"], [("a", "b", 0.7)])
    assert float(table.vector("a") @ table.vector("c")) == 0.0
    assert float(table.vector("b") @ table.vector("c")) == 0.0


def test_synonym_cosine_one_identical():
    table = synth.synonym_table(["a", "b"], [("a", "b", 1.0)])
    assert np.allclose(table.vector("a"), table.vector("b"))


def test_synonym_overlapping_pairs_rejected():
    with pytest.raises(InfeasibleCosinesError):
        synth.synonym_table(["a", "b", "c"], [("a", "b", 0.5), ("b", "c", 0.5)])


def test_synonym_out_of_range_cosine():
    with pytest.raises(InfeasibleCosinesError):
        synth.synonym_table(["a", "b"], [("a", "b", 1.5)])
