import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, Union

import numpy as np

from src.errors import FileFormatError, MissingReferenceError
from src.scene.primitives import Box, HalfSpace, SceneError, SdfPrimitive, Sphere

logger = logging.getLogger("scene")


@dataclass(frozen=True)
class Scene:
    """Union of primitives; the union distance is the minimum over primitives"""
    primitives: Tuple[SdfPrimitive, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))

    def __len__(self) -> int:
        return len(self.primitives)

    @property
    def is_empty(self) -> bool:
        return not self.primitives

    def with_primitive(self, primitive: SdfPrimitive) -> "Scene":
        return Scene(self.primitives + (primitive,))

    def _active(self, points: np.ndarray):
        distances = np.stack([p.distance(points) for p in self.primitives], axis=-1)
        # argmin returns the lowest index on ties
        active = np.argmin(distances, axis=-1)
        return distances[np.arange(len(points)), active], active

    def distances(self, points: np.ndarray) -> np.ndarray:
        points = _points(points)
        if self.is_empty:
            return np.full(len(points), np.inf)
        return self._active(points)[0]

    def gradients(self, points: np.ndarray) -> np.ndarray:
        points = _points(points)
        out = np.zeros_like(points)
        if self.is_empty:
            return out
        _, active = self._active(points)
        for index, primitive in enumerate(self.primitives):
            picked = active == index
            if np.any(picked):
                out[picked] = primitive.gradient(points[picked])
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {"primitives": [p.to_dict() for p in self.primitives]}


def _points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.shape[-1] != 3:
        raise SceneError(f"Scene queries need 3-vectors, got shape {arr.shape}")
    return arr.reshape(-1, 3)


def sdf_eval(scene: Scene, p) -> float:
    """Signed distance of one point to the scene; +inf when the scene is empty"""
    return float(scene.distances(p)[0])


def sdf_gradient(scene: Scene, p) -> np.ndarray:
    return scene.gradients(p)[0]


def _shape_to_type(shape: str) -> Optional[Type[SdfPrimitive]]:
    if shape == "sphere":
        return Sphere
    elif shape == "box":
        return Box
    elif shape in ("half_space", "halfspace", "plane"):
        return HalfSpace
    return None


def primitive_from_dict(entry: Dict[str, Any]) -> SdfPrimitive:
    shape = entry.get("shape")
    primitive_type = _shape_to_type(shape)
    if primitive_type is None:
        raise FileFormatError(f"Unknown primitive shape: {shape!r}")
    params = {k: v for k, v in entry.items() if k != "shape"}
    try:
        return primitive_type(**params)
    except TypeError as e:
        raise FileFormatError(f"Bad parameters for {shape}: {e}")


def scene_from_dict(data: Dict[str, Any]) -> Scene:
    entries = data.get("primitives")
    if not isinstance(entries, list):
        raise FileFormatError("Scene file must contain a 'primitives' list")
    return Scene(tuple(primitive_from_dict(e) for e in entries))


def load_scene(path: Union[str, Path]) -> Scene:
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise MissingReferenceError(f"Scene file not found: {path}")
    except json.JSONDecodeError as e:
        raise FileFormatError(f"Scene file {path} contains invalid JSON: {e}")
    scene = scene_from_dict(data)
    logger.debug(f"Loaded scene {path.name} with {len(scene)} primitives")
    return scene


def save_scene(scene: Scene, path: Union[str, Path]) -> None:
    with open(path, "w") as f:
        json.dump(scene.to_dict(), f, indent=2)
