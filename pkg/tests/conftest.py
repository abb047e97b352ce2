from pathlib import Path

import numpy as np
import pytest

from src.kinematics.skeleton import JointSpec, Skeleton, load_skeleton
from src.model import PredictorModel
from tests.helpers import tiny_model

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def skeleton() -> Skeleton:
    return load_skeleton(CONFIGS / "skeletons" / "default.json")


@pytest.fixture(scope="session")
def arm() -> Skeleton:
    """Pelvis, shoulder and hand: a 12-dimensional state"""
    joints = (
        JointSpec("pelvis", -1, (0.0, 0.0, 0.0)),
        JointSpec("shoulder", 0, (0.0, -0.2, 0.5)),
        JointSpec("hand", 1, (0.0, 0.0, -0.6), end_effector="right"),
    )
    return Skeleton("arm", joints, key_joints=("pelvis", "hand"))


@pytest.fixture
def arm_model(arm) -> PredictorModel:
    return tiny_model(arm.state_dim, hidden=32)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
