from dataclasses import dataclass
from typing import Literal

import numpy as np

from src.errors import DimensionMismatchError
from src.kinematics.skeleton import KinematicsError

Layout = Literal["human", "robot"]


class TrajectoryError(KinematicsError):
    """Raised when a trajectory is too short or inconsistent"""
    code = "trajectory"


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed states at a fixed frame rate"""
    frame_rate: float
    states: np.ndarray
    layout: Layout = "human"

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim != 2:
            raise DimensionMismatchError(f"Trajectory states must be (frames, dim), got shape {states.shape}")
        if not self.frame_rate > 0:
            raise TrajectoryError(f"Frame rate must be positive, got {self.frame_rate}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def period(self) -> float:
        return 1.0 / self.frame_rate

    @property
    def duration(self) -> float:
        return len(self) / self.frame_rate

    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.frame_rate

    def window(self, start: int, stop: int) -> "Trajectory":
        return Trajectory(self.frame_rate, self.states[start:stop], self.layout)


def finite_difference_velocities(traj: Trajectory) -> np.ndarray:
    """Backward differences v_t = s_t - s_(t-1) with v_0 replicated from v_1.

    Rotation coordinates are differenced directly in exponential-map
    coordinates, which is accurate for the small per-frame rotations of
    human motion sampled at 30 Hz.
    """
    if len(traj) < 2:
        raise TrajectoryError(f"Velocities need at least 2 frames, got {len(traj)}")
    return velocities_of(traj.states)


def velocities_of(states: np.ndarray) -> np.ndarray:
    """Array form of finite_difference_velocities, works on (..., frames, dim)"""
    states = np.asarray(states, dtype=float)
    v = np.empty_like(states)
    v[..., 1:, :] = states[..., 1:, :] - states[..., :-1, :]
    v[..., 0, :] = v[..., 1, :]
    return v
