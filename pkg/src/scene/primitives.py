from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from src.errors import ConfigurationError, MfoError


class SceneError(MfoError):
    """Raised for invalid primitives or scene files"""
    code = "scene"


class InvalidPrimitiveError(SceneError, ConfigurationError):
    code = "invalid-primitive"


def _vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise InvalidPrimitiveError(f"{name} must be a finite 3-vector, got {value!r}")
    arr.setflags(write=False)
    return arr


class SdfPrimitive(ABC):
    """Analytic signed distance: negative inside, zero on the surface, positive outside"""
    shape: str = ""

    @abstractmethod
    def distance(self, points: np.ndarray) -> np.ndarray:
        """(N, 3) -> (N,)"""
        pass

    @abstractmethod
    def gradient(self, points: np.ndarray) -> np.ndarray:
        """(N, 3) -> (N, 3)"""
        pass

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        pass


@dataclass(frozen=True, eq=False)
class Sphere(SdfPrimitive):
    center: np.ndarray
    radius: float
    shape = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "center", _vector(self.center, "sphere center"))
        if not self.radius > 0:
            raise InvalidPrimitiveError(f"Sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    def distance(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points - self.center, axis=-1) - self.radius

    def gradient(self, points: np.ndarray) -> np.ndarray:
        diff = points - self.center
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        # zero at the center by convention
        return np.where(norm > 0.0, diff / np.where(norm > 0.0, norm, 1.0), 0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(SdfPrimitive):
    """Axis-aligned box"""
    center: np.ndarray
    half_extents: np.ndarray
    shape = "box"

    def __post_init__(self):
        object.__setattr__(self, "center", _vector(self.center, "box center"))
        half = _vector(self.half_extents, "box half_extents")
        if np.any(half <= 0.0):
            raise InvalidPrimitiveError(f"Box half extents must be positive, got {half.tolist()}")
        object.__setattr__(self, "half_extents", half)

    def _q(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        local = points - self.center
        return local, np.abs(local) - self.half_extents

    def distance(self, points: np.ndarray) -> np.ndarray:
        _, q = self._q(points)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def gradient(self, points: np.ndarray) -> np.ndarray:
        local, q = self._q(points)
        sign = np.where(local >= 0.0, 1.0, -1.0)
        positive = np.maximum(q, 0.0)
        norm = np.linalg.norm(positive, axis=-1, keepdims=True)
        outside = sign * positive / np.where(norm > 0.0, norm, 1.0)
        # inside and on faces: normal of the nearest face, lowest axis on ties
        axis = np.argmax(q, axis=-1)
        inside = np.zeros_like(local)
        rows = np.arange(len(local))
        inside[rows, axis] = sign[rows, axis]
        return np.where(norm > 0.0, outside, inside)

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape, "center": self.center.tolist(), "half_extents": self.half_extents.tolist()}


@dataclass(frozen=True, eq=False)
class HalfSpace(SdfPrimitive):
    """Everything behind the plane through point with outward normal"""
    point: np.ndarray
    normal: np.ndarray
    shape = "half_space"

    def __post_init__(self):
        object.__setattr__(self, "point", _vector(self.point, "half-space point"))
        normal = np.array(_vector(self.normal, "half-space normal"))
        length = np.linalg.norm(normal)
        if length < 1e-12:
            raise InvalidPrimitiveError("Half-space normal must be nonzero")
        normal = normal / length
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)

    def distance(self, points: np.ndarray) -> np.ndarray:
        return (points - self.point) @ self.normal

    def gradient(self, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.normal, points.shape).copy()

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape, "point": self.point.tolist(), "normal": self.normal.tolist()}
