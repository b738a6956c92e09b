import json

import numpy as np
import pytest

from teleopkit.kinematics import load_model, load_named_model


@pytest.fixture(scope="session")
def arm7():
    return load_named_model("builtin:arm7-generic")


@pytest.fixture(scope="session")
def hand12():
    return load_named_model("builtin:hand12-generic")


@pytest.fixture(scope="session")
def composite19():
    return load_named_model("builtin:arm7-hand12")


PLANAR2_DOC = {
    "format": "model-v1",
    "name": "planar2",
    "joints": [
        {"name": "j1", "type": "revolute", "parent": None, "axis": [0, 0, 1],
         "origin": {"xyz": [0, 0, 0]}, "limits": [-3.14, 3.14]},
        {"name": "j2", "type": "revolute", "parent": "j1", "axis": [0, 0, 1],
         "origin": {"xyz": [1.0, 0, 0]}, "limits": [-3.14, 3.14]},
        {"name": "tip", "type": "fixed", "parent": "j2",
         "origin": {"xyz": [1.0, 0, 0]}},
    ],
    "frames": {"tip": "tip"},
}


@pytest.fixture(scope="session")
def planar2():
    return load_model(json.dumps(PLANAR2_DOC))


def random_q(model, rng, margin=0.0):
    """Uniform sample within (optionally shrunk) joint limits."""
    lo, hi = model.limits_lo, model.limits_hi
    span = hi - lo
    return lo + span * (margin + (1 - 2 * margin) * rng.random(model.dof))


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
