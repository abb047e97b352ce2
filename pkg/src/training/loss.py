from typing import Tuple

import numpy as np

from src.errors import DimensionMismatchError
from src.kinematics.rotations import expmap_to_quat_array, expmap_to_quat_jacobian, quat_loss_array


def _check(predicted: np.ndarray, target: np.ndarray):
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    if predicted.shape != target.shape:
        raise DimensionMismatchError(f"Predicted shape {predicted.shape} does not match target {target.shape}")
    if predicted.shape[-1] < 6 or (predicted.shape[-1] - 3) % 3:
        raise DimensionMismatchError(f"State dimension {predicted.shape[-1]} is not 3 + 3 * rotations")
    return predicted, target


def motion_loss_and_grad(predicted: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Squared base-position error plus the antipodal quaternion distance of every rotation.

    Works on (..., frames, D) arrays; the value is summed over everything and
    the gradient is taken with respect to the predicted states.
    """
    predicted, target = _check(predicted, target)
    grad = np.zeros_like(predicted)
    diff = predicted[..., :3] - target[..., :3]
    value = float(np.sum(diff * diff))
    grad[..., :3] = 2.0 * diff

    rot_shape = predicted.shape[:-1] + (-1, 3)
    e_pred = predicted[..., 3:].reshape(rot_shape)
    e_true = target[..., 3:].reshape(rot_shape)
    dist, g_quat = quat_loss_array(expmap_to_quat_array(e_pred), expmap_to_quat_array(e_true))
    value += float(np.sum(dist))
    g_expmap = np.einsum("...q,...qi->...i", g_quat, expmap_to_quat_jacobian(e_pred))
    grad[..., 3:] = g_expmap.reshape(predicted.shape[:-1] + (-1,))
    return value, grad


def motion_loss(predicted: np.ndarray, target: np.ndarray) -> float:
    value, _ = motion_loss_and_grad(predicted, target)
    return value
