from dataclasses import dataclass, fields
from typing import Dict, Tuple

import numpy as np

from src.errors import DimensionMismatchError

GATES = ("z", "r", "h")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class GruLayerWeights:
    """One gated recurrent layer: update (z), reset (r) and candidate (h) gates"""
    w_z: np.ndarray
    w_r: np.ndarray
    w_h: np.ndarray
    u_z: np.ndarray
    u_r: np.ndarray
    u_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        hidden, inputs = self.w_z.shape
        for gate in GATES:
            if getattr(self, f"w_{gate}").shape != (hidden, inputs):
                raise DimensionMismatchError(f"w_{gate} must have shape {(hidden, inputs)}")
            if getattr(self, f"u_{gate}").shape != (hidden, hidden):
                raise DimensionMismatchError(f"u_{gate} must have shape {(hidden, hidden)}")
            if getattr(self, f"b_{gate}").shape != (hidden,):
                raise DimensionMismatchError(f"b_{gate} must have shape {(hidden,)}")

    @property
    def hidden_size(self) -> int:
        return self.w_z.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_z.shape[1]

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int, dtype=np.float64) -> "GruLayerWeights":
        shapes = cls.shapes(input_size, hidden_size)
        return cls(**{name: np.zeros(shape, dtype=dtype) for name, shape in shapes.items()})

    @classmethod
    def random(cls, input_size: int, hidden_size: int, rng: np.random.Generator, dtype=np.float64) -> "GruLayerWeights":
        bound = 1.0 / np.sqrt(hidden_size)
        shapes = cls.shapes(input_size, hidden_size)
        return cls(**{name: rng.uniform(-bound, bound, size=shape).astype(dtype) for name, shape in shapes.items()})

    @staticmethod
    def shapes(input_size: int, hidden_size: int) -> Dict[str, Tuple[int, ...]]:
        out = {}
        for gate in GATES:
            out[f"w_{gate}"] = (hidden_size, input_size)
        for gate in GATES:
            out[f"u_{gate}"] = (hidden_size, hidden_size)
        for gate in GATES:
            out[f"b_{gate}"] = (hidden_size,)
        return out

    def tensors(self) -> Dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class GruCache:
    x: np.ndarray
    h: np.ndarray
    z: np.ndarray
    r: np.ndarray
    candidate: np.ndarray


def gru_forward(weights: GruLayerWeights, x: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, GruCache]:
    """Batched step; x is (B, I) and h is (B, H)"""
    z = sigmoid(x @ weights.w_z.T + h @ weights.u_z.T + weights.b_z)
    r = sigmoid(x @ weights.w_r.T + h @ weights.u_r.T + weights.b_r)
    candidate = np.tanh(x @ weights.w_h.T + (r * h) @ weights.u_h.T + weights.b_h)
    h_new = (1.0 - z) * h + z * candidate
    return h_new, GruCache(x=x, h=h, z=z, r=r, candidate=candidate)


def gru_backward(weights: GruLayerWeights, cache: GruCache, dh_new: np.ndarray,
                 grads: Dict[str, np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Reverse of gru_forward; returns (dx, dh) and accumulates weight gradients into grads"""
    x, h, z, r, cand = cache.x, cache.h, cache.z, cache.r, cache.candidate
    dz = dh_new * (cand - h)
    dh = dh_new * (1.0 - z)
    da_h = dh_new * z * (1.0 - cand * cand)
    d_rh = da_h @ weights.u_h
    dr = d_rh * h
    dh += d_rh * r
    da_z = dz * z * (1.0 - z)
    da_r = dr * r * (1.0 - r)

    dx = da_z @ weights.w_z + da_r @ weights.w_r + da_h @ weights.w_h
    dh += da_z @ weights.u_z + da_r @ weights.u_r

    if grads is not None:
        rh = r * h
        grads["w_z"] += da_z.T @ x
        grads["w_r"] += da_r.T @ x
        grads["w_h"] += da_h.T @ x
        grads["u_z"] += da_z.T @ h
        grads["u_r"] += da_r.T @ h
        grads["u_h"] += da_h.T @ rh
        grads["b_z"] += da_z.sum(axis=0)
        grads["b_r"] += da_r.sum(axis=0)
        grads["b_h"] += da_h.sum(axis=0)
    return dx, dh


def gru_cell_step(weights: GruLayerWeights, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Single unbatched update h' = (1 - z) * h + z * tanh(W x + U (r * h) + b)"""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.shape != (weights.input_size,) or h.shape != (weights.hidden_size,):
        raise DimensionMismatchError(
            f"GRU step expects x {(weights.input_size,)} and h {(weights.hidden_size,)}, got {x.shape} and {h.shape}")
    h_new, _ = gru_forward(weights, x[None, :], h[None, :])
    return h_new[0]
