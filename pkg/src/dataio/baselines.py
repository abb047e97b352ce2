import numpy as np

from src.kinematics.trajectory import Trajectory, TrajectoryError


def zero_velocity_baseline(observed: Trajectory, horizon: int) -> Trajectory:
    """Repeat the last observed state for every future step"""
    if len(observed) == 0:
        raise TrajectoryError("Zero-velocity baseline needs at least one observed frame")
    states = np.repeat(observed.states[-1:], horizon, axis=0)
    return Trajectory(observed.frame_rate, states, observed.layout)


def interpolation_baseline(start: np.ndarray, goal: np.ndarray, horizon: int) -> np.ndarray:
    """Equally spaced straight line from the current wrist position; the last step is exactly the goal"""
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    path = start + (goal - start) * (np.arange(1, horizon + 1)[:, None] / horizon)
    path[-1] = goal
    return path
