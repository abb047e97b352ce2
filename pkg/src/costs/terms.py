from typing import Tuple

import numpy as np

from src.errors import DimensionMismatchError, MfoError
from src.scene import Scene


class CostError(MfoError):
    """Base exception for cost evaluation errors"""
    code = "cost"


def _arc_lengths(points: np.ndarray, anchor: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Backward steps d_t = p_t - p_(t-1) with p_0 = anchor, their lengths and unit directions"""
    previous = np.concatenate([np.asarray(anchor, dtype=float).reshape(1, 3), points[:-1]])
    steps = points - previous
    lengths = np.linalg.norm(steps, axis=-1)
    safe = np.where(lengths > 0.0, lengths, 1.0)
    units = np.where((lengths > 0.0)[:, None], steps / safe[:, None], 0.0)
    return lengths, units


def _arc_length_gradient(weights: np.ndarray, units: np.ndarray) -> np.ndarray:
    """Gradient of sum_t weights_t * |p_t - p_(t-1)| with respect to p_1..p_T"""
    grad = weights[:, None] * units
    grad[:-1] -= weights[1:, None] * units[1:]
    return grad


def _points(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) < 1:
        raise DimensionMismatchError(f"Expected a (T, 3) position sequence, got shape {points.shape}")
    return points


def cost_delta(delta: np.ndarray) -> Tuple[float, np.ndarray]:
    delta = np.asarray(delta, dtype=float)
    return float(np.sum(delta * delta)), 2.0 * delta


def cost_goal_point(final: np.ndarray, goal: np.ndarray) -> Tuple[float, np.ndarray]:
    """Squared distance of a final position to its goal"""
    diff = np.asarray(final, dtype=float) - np.asarray(goal, dtype=float)
    return float(diff @ diff), 2.0 * diff


def cost_goal_path(points: np.ndarray, goal: np.ndarray) -> Tuple[float, np.ndarray]:
    points = _points(points)
    value, g_final = cost_goal_point(points[-1], goal)
    grad = np.zeros_like(points)
    grad[-1] = g_final
    return value, grad


def cost_obstacle(points: np.ndarray, scene: Scene, alpha: float, anchor: np.ndarray) -> Tuple[float, np.ndarray]:
    """sum_t exp(-alpha * sdf(p_t)) * |p_t - p_(t-1)|, arc length anchored at p_0"""
    points = _points(points)
    if scene.is_empty:
        return 0.0, np.zeros_like(points)
    lengths, units = _arc_lengths(points, anchor)
    potential = np.exp(-alpha * scene.distances(points))
    value = float(np.sum(potential * lengths))
    grad = (-alpha * potential * lengths)[:, None] * scene.gradients(points)
    grad += _arc_length_gradient(potential, units)
    return value, grad


def cost_interaction(human: np.ndarray, robot: np.ndarray, alpha: float, human_anchor: np.ndarray,
                     robot_anchor: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """sum_t exp(-alpha |p_t - r_t|) * dH_t * dR_t and its gradients for both agents"""
    human = _points(human)
    robot = _points(robot)
    if human.shape != robot.shape:
        raise DimensionMismatchError(f"Human path has {len(human)} steps, robot path has {len(robot)}")
    len_h, unit_h = _arc_lengths(human, human_anchor)
    len_r, unit_r = _arc_lengths(robot, robot_anchor)
    gap = human - robot
    dist = np.linalg.norm(gap, axis=-1)
    safe = np.where(dist > 0.0, dist, 1.0)
    gap_unit = np.where((dist > 0.0)[:, None], gap / safe[:, None], 0.0)
    potential = np.exp(-alpha * dist)
    value = float(np.sum(potential * len_h * len_r))

    g_gap = (-alpha * potential * len_h * len_r)[:, None] * gap_unit
    g_human = g_gap + _arc_length_gradient(potential * len_r, unit_h)
    g_robot = -g_gap + _arc_length_gradient(potential * len_h, unit_r)
    return value, g_human, g_robot
