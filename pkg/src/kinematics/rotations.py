import logging
from dataclasses import dataclass

import numpy as np

from src.errors import MfoError

logger = logging.getLogger("kinematics.rotations")

# below this angle the sinc-like factors switch to their Taylor series
SMALL_ANGLE = 1e-2
QUATERNION_NORM_TOLERANCE = 1e-6


class QuaternionNormError(MfoError):
    """Raised when a quaternion is too far from unit norm to be a rotation"""
    code = "quaternion-norm"


def skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def canonical_expmap(v: np.ndarray) -> np.ndarray:
    """Re-wrap an exponential map so that its angle lies in [0, pi]"""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    if theta <= np.pi:
        return v.copy()
    axis = v / theta
    wrapped = np.mod(theta, 2.0 * np.pi)
    if wrapped > np.pi:
        wrapped = 2.0 * np.pi - wrapped
        axis = -axis
    return axis * wrapped


def _half_sinc(theta: np.ndarray) -> np.ndarray:
    """sin(theta/2) / theta, safe at zero"""
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    return np.where(small, 0.5 - t2 / 48.0 + t2 * t2 / 3840.0, np.sin(0.5 * safe) / safe)


def _half_sinc_slope(theta: np.ndarray) -> np.ndarray:
    """d/dtheta(sin(theta/2)/theta) / theta, safe at zero"""
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    exact = (0.5 * safe * np.cos(0.5 * safe) - np.sin(0.5 * safe)) / safe ** 3
    return np.where(small, -1.0 / 24.0 + theta * theta / 960.0, exact)


def expmap_to_quat_array(e: np.ndarray) -> np.ndarray:
    """Vectorised conversion (..., 3) -> (..., 4) with w first"""
    e = np.asarray(e, dtype=float)
    theta = np.linalg.norm(e, axis=-1)
    w = np.cos(0.5 * theta)
    xyz = _half_sinc(theta)[..., None] * e
    return np.concatenate([w[..., None], xyz], axis=-1)


def expmap_to_quat_jacobian(e: np.ndarray) -> np.ndarray:
    """d quaternion / d expmap, shape (..., 4, 3)"""
    e = np.asarray(e, dtype=float)
    theta = np.linalg.norm(e, axis=-1)
    f = _half_sinc(theta)
    slope = _half_sinc_slope(theta)
    jac = np.zeros(e.shape[:-1] + (4, 3))
    jac[..., 0, :] = -0.5 * f[..., None] * e
    jac[..., 1:, :] = f[..., None, None] * np.eye(3) + slope[..., None, None] * e[..., :, None] * e[..., None, :]
    return jac


def quat_to_expmap_array(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    norms = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(norms - 1.0) > QUATERNION_NORM_TOLERANCE):
        raise QuaternionNormError(f"Quaternion norm deviates from 1 by more than {QUATERNION_NORM_TOLERANCE}")
    q = q / norms[..., None]
    # w >= 0 keeps the angle in [0, pi]
    q = np.where(q[..., :1] < 0.0, -q, q)
    w = q[..., 0]
    xyz = q[..., 1:]
    n = np.linalg.norm(xyz, axis=-1)
    small = n < 1e-12
    safe = np.where(small, 1.0, n)
    factor = np.where(small, 2.0 / np.maximum(w, 1e-300), 2.0 * np.arctan2(n, w) / safe)
    return factor[..., None] * xyz


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a * b for (..., 4) arrays"""
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def expmap_to_matrix(v: np.ndarray) -> np.ndarray:
    """Rodrigues formula for a single 3-vector"""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    k = skew(v)
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * (k @ k)


def expmap_matrix_derivatives(v: np.ndarray, rotation: np.ndarray = None) -> np.ndarray:
    """dR/dv_i for i = 0..2, shape (3, 3, 3) indexed [i, row, col]"""
    v = np.asarray(v, dtype=float)
    if rotation is None:
        rotation = expmap_to_matrix(v)
    theta2 = float(v @ v)
    eye = np.eye(3)
    out = np.empty((3, 3, 3))
    if theta2 < 1e-12:
        kv = skew(v)
        for i in range(3):
            ki = skew(eye[i])
            out[i] = ki + 0.5 * (ki @ kv + kv @ ki)
        return out
    kv = skew(v)
    residual = eye - rotation
    for i in range(3):
        out[i] = (v[i] * kv + skew(np.cross(v, residual[:, i]))) @ rotation / theta2
    return out


def matrix_to_expmap(rotation: np.ndarray) -> np.ndarray:
    """Inverse of Rodrigues via a quaternion, result in the canonical range"""
    r = np.asarray(rotation, dtype=float)
    trace = np.trace(r)
    if trace > 0.0:
        s = 2.0 * np.sqrt(trace + 1.0)
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = 2.0 * np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
        q = np.array([(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] > r[2, 2]:
        s = 2.0 * np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
        q = np.array([(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
        q = np.array([(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s])
    return quat_to_expmap_array(q / np.linalg.norm(q))


def unwrap_expmap_sequence(seq: np.ndarray) -> np.ndarray:
    """Pick, frame by frame, the equivalent exponential map closest to the previous one.

    v and v * (1 - 2*pi/|v|) encode the same rotation; choosing between them
    removes the 2*pi jumps that canonical wrapping introduces, so finite
    differences stay small.
    """
    seq = np.array(seq, dtype=float)
    for t in range(1, len(seq)):
        v = seq[t]
        theta = np.linalg.norm(v)
        if theta < 1e-12:
            continue
        candidates = [v, v * (1.0 - 2.0 * np.pi / theta)]
        seq[t] = min(candidates, key=lambda c: np.linalg.norm(c - seq[t - 1]))
    return seq


@dataclass(frozen=True)
class ExpMap:
    """Rotation of angle |v| about v/|v|, kept in the canonical range |v| <= pi"""
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(3)
        object.__setattr__(self, "v", canonical_expmap(v))

    @property
    def angle(self) -> float:
        return float(np.linalg.norm(self.v))

    def to_matrix(self) -> np.ndarray:
        return expmap_to_matrix(self.v)


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion (w, x, y, z); q and -q are the same rotation"""
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        arr = self.as_array()
        norm = np.linalg.norm(arr)
        if abs(norm - 1.0) > QUATERNION_NORM_TOLERANCE:
            raise QuaternionNormError(f"Quaternion norm {norm:.9f} is not 1")
        arr = arr / norm
        for name, value in zip("wxyz", arr):
            object.__setattr__(self, name, float(value))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Quaternion":
        return cls(*(float(c) for c in np.asarray(arr, dtype=float).reshape(4)))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)


def expmap_to_quat(e: ExpMap) -> Quaternion:
    q = expmap_to_quat_array(e.v)
    return Quaternion.from_array(q / np.linalg.norm(q))


def quat_to_expmap(q: Quaternion) -> ExpMap:
    return ExpMap(quat_to_expmap_array(q.as_array()))


def quat_loss_pair(q_pred: Quaternion, q_true: Quaternion) -> float:
    """Antipodally symmetric distance min(|q' - q|, |q' + q|)"""
    a = q_pred.as_array()
    b = q_true.as_array()
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def quat_loss_array(q_pred: np.ndarray, q_true: np.ndarray):
    """Vectorised pair loss and its gradient with respect to q_pred"""
    minus = q_pred - q_true
    plus = q_pred + q_true
    d_minus = np.linalg.norm(minus, axis=-1)
    d_plus = np.linalg.norm(plus, axis=-1)
    use_minus = d_minus <= d_plus
    diff = np.where(use_minus[..., None], minus, plus)
    dist = np.where(use_minus, d_minus, d_plus)
    safe = np.where(dist > 0.0, dist, 1.0)
    grad = np.where((dist > 0.0)[..., None], diff / safe[..., None], 0.0)
    return dist, grad
