from __future__ import annotations

import numpy as np
import pytest

from spinseg import pcio, synth


@pytest.fixture(scope="session")
def boxes3_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("boxes3")
    synth.generate_scene(synth.boxes3_spec(), root)
    return root


@pytest.fixture(scope="session")
def cluttered8_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cluttered8")
    synth.generate_scene(synth.cluttered8_spec(), root)
    return root


@pytest.fixture()
def identity_frame():
    """100x100 camera at the origin, fx=fy=100, principal point (50, 50)."""
    return pcio.Frame(
        image_id="f0",
        width=100,
        height=100,
        intrinsics=(100.0, 100.0, 50.0, 50.0),
        extrinsics=np.eye(4),
    )


def one_hot_table(labels):
    return synth.synonym_table(list(labels))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
