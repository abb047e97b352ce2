from typing import Literal, Optional, Tuple

import numpy as np

from src.costs.terms import CostError
from src.errors import DimensionMismatchError

SmoothnessVariant = Literal["difference", "printed"]


def second_difference_matrix(T: int) -> np.ndarray:
    """(T-2) x T stencil (1, -2, 1)"""
    D = np.zeros((T - 2, T))
    for i in range(T - 2):
        D[i, i:i + 3] = (1.0, -2.0, 1.0)
    return D


def build_K(T: int, variant: SmoothnessVariant = "difference") -> np.ndarray:
    """Finite-difference smoothness matrix.

    "difference" is D^T D with free boundaries, so constant and linear
    trajectories cost nothing. "printed" is the plain pentadiagonal band
    (1, -4, 6, -4, 1) cut at the borders with a 1 in the last diagonal entry.
    """
    if T < 3:
        raise CostError(f"Smoothness matrix needs at least 3 steps, got {T}")
    if variant == "difference":
        D = second_difference_matrix(T)
        return D.T @ D
    if variant == "printed":
        K = 6.0 * np.eye(T)
        K -= 4.0 * (np.eye(T, k=1) + np.eye(T, k=-1))
        K += np.eye(T, k=2) + np.eye(T, k=-2)
        K[-1, -1] = 1.0
        return K
    raise CostError(f"Unknown smoothness variant: {variant}")


def cost_smooth(x: np.ndarray, K: np.ndarray) -> Tuple[float, np.ndarray]:
    """Sum over coordinates of x_c^T K x_c; x is (T,) or (T, dims)"""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != K.shape[0]:
        raise DimensionMismatchError(f"Trajectory has {x.shape[0]} steps, smoothness matrix expects {K.shape[0]}")
    Kx = K @ x
    return float(np.sum(x * Kx)), 2.0 * Kx


def anchored_smoothness(x: np.ndarray, start: np.ndarray,
                        variant: SmoothnessVariant = "difference",
                        K: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """Smoothness of a robot trajectory that leaves a resting start state.

    The start is prepended twice so the first commanded step is smoothed as
    well; returns the value and the gradient with respect to x only.
    """
    x = np.asarray(x, dtype=float)
    start = np.asarray(start, dtype=float).reshape(1, -1)
    if start.shape[1] != x.shape[1]:
        raise DimensionMismatchError(f"Start has dimension {start.shape[1]}, trajectory has {x.shape[1]}")
    full = np.concatenate([start, start, x])
    if K is None:
        K = build_K(len(full), variant)
    value, grad = cost_smooth(full, K)
    return value, grad[2:]
