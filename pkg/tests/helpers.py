import numpy as np

from src.model import PredictorModel
from src.types import ModelConfig


def tiny_model(state_dim: int, hidden: int = 16, layers: int = 1, seed: int = 0,
               output_scale: float = 0.5) -> PredictorModel:
    config = ModelConfig(state_dim=state_dim, hidden_size=hidden, num_layers=layers, dtype="float64",
                         init_seed=seed)
    return PredictorModel.initialize(config, output_scale=output_scale)


def random_states(rng: np.random.Generator, frames: int, dim: int, scale: float = 0.3) -> np.ndarray:
    """Smooth random walk: base near the origin, joint rotations well inside (-pi, pi)"""
    steps = rng.normal(scale=0.02, size=(frames, dim))
    start = rng.uniform(-scale, scale, size=dim)
    states = start + np.cumsum(steps, axis=0)
    states[:, 2] += 1.0
    return states


def central_difference(fun, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Numerical gradient of a scalar function of an array"""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        orig = x[index]
        x[index] = orig + eps
        up = fun(x)
        x[index] = orig - eps
        down = fun(x)
        x[index] = orig
        grad[index] = (up - down) / (2.0 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))
