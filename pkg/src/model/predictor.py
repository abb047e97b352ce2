import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from src.errors import DimensionMismatchError, MfoError
from src.kinematics.trajectory import Trajectory, velocities_of
from src.model.gru import GruCache, GruLayerWeights, gru_backward, gru_forward
from src.types import ModelConfig

logger = logging.getLogger("model.predictor")


class ModelError(MfoError):
    """Base exception for predictor model errors"""
    code = "model"


class MissingActivationsError(ModelError):
    """Raised when a gradient is requested for a rollout that kept no activations"""
    code = "missing-activations"


@dataclass
class StepCache:
    x: np.ndarray
    layers: List[GruCache]
    top: np.ndarray


@dataclass
class UnrollCache:
    encoder: List[StepCache]
    decoder: List[StepCache]
    batch: int


@dataclass
class BatchRollout:
    states: np.ndarray              # (B, T, D)
    velocities: np.ndarray          # (B, T, D)
    encoder_predictions: np.ndarray  # (B, n-1, D) one-step-ahead predictions of observed frames 1..n-1
    cache: Optional[UnrollCache]


@dataclass
class RolloutResult:
    """Predicted states s'_1..s'_T with s'_k = s'_(k-1) + velocities[k-1] exactly"""
    states: np.ndarray
    velocities: np.ndarray
    encoder_predictions: np.ndarray
    cache: Optional[UnrollCache] = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.states)


@dataclass
class DeltaInput:
    """Per-step perturbation of the decoder velocities, optionally restricted by a coordinate mask"""
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != (self.values.shape[1],):
                raise DimensionMismatchError(
                    f"Delta mask has shape {self.mask.shape}, expected {(self.values.shape[1],)}")

    @classmethod
    def zeros(cls, horizon: int, dim: int, mask: Optional[np.ndarray] = None) -> "DeltaInput":
        return cls(np.zeros((horizon, dim)), mask)

    def effective(self) -> np.ndarray:
        if self.mask is None:
            return self.values
        return self.values * self.mask


class PredictorModel:
    """Position-velocity recurrent encoder-decoder.

    One recurrent core (input projection, stacked GRU layers, output
    projection) is shared by the encoder and the decoder. At every step the
    core sees the masked state and the velocity, emits a velocity for every
    state coordinate, and the next state is the previous one plus that
    velocity. The decoder perturbation delta_k is added to the emitted
    velocity, so it enters both the residual connection and the velocity
    input of the following step.
    """

    def __init__(self, config: ModelConfig, input_weight: np.ndarray, input_bias: np.ndarray,
                 layers: List[GruLayerWeights], output_weight: np.ndarray, output_bias: np.ndarray):
        self.config = config
        self.input_weight = input_weight
        self.input_bias = input_bias
        self.layers = list(layers)
        self.output_weight = output_weight
        self.output_bias = output_bias
        self._check_shapes()

    @property
    def state_dim(self) -> int:
        return self.config.state_dim

    @property
    def hidden_size(self) -> int:
        return self.config.hidden_size

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    @property
    def recurrent_mask(self) -> np.ndarray:
        mask = np.ones(self.state_dim, dtype=bool)
        mask[self.config.blind_coordinates] = False
        return mask

    @property
    def input_size(self) -> int:
        return int(self.recurrent_mask.sum()) + self.state_dim

    @staticmethod
    def parameter_shapes(config: ModelConfig) -> Dict[str, tuple]:
        hidden = config.hidden_size
        inputs = config.state_dim - len(set(config.blind_coordinates)) + config.state_dim
        shapes = OrderedDict()
        shapes["input_projection.weight"] = (hidden, inputs)
        shapes["input_projection.bias"] = (hidden,)
        for layer in range(config.num_layers):
            for name, shape in GruLayerWeights.shapes(hidden, hidden).items():
                shapes[f"gru.{layer}.{name}"] = shape
        shapes["output_projection.weight"] = (config.state_dim, hidden)
        shapes["output_projection.bias"] = (config.state_dim,)
        return shapes

    def _check_shapes(self) -> None:
        expected = self.parameter_shapes(self.config)
        for name, value in self.parameters().items():
            if value.shape != expected[name]:
                raise DimensionMismatchError(f"Parameter {name} has shape {value.shape}, expected {expected[name]}")

    @classmethod
    def from_parameters(cls, config: ModelConfig, params: Dict[str, np.ndarray]) -> "PredictorModel":
        dtype = np.dtype(config.dtype)
        layers = []
        for layer in range(config.num_layers):
            prefix = f"gru.{layer}."
            layers.append(GruLayerWeights(**{
                name: np.asarray(params[prefix + name], dtype=dtype)
                for name in GruLayerWeights.shapes(1, 1)
            }))
        return cls(
            config,
            np.asarray(params["input_projection.weight"], dtype=dtype),
            np.asarray(params["input_projection.bias"], dtype=dtype),
            layers,
            np.asarray(params["output_projection.weight"], dtype=dtype),
            np.asarray(params["output_projection.bias"], dtype=dtype),
        )

    @classmethod
    def zeros(cls, config: ModelConfig) -> "PredictorModel":
        dtype = np.dtype(config.dtype)
        return cls.from_parameters(config, {
            name: np.zeros(shape, dtype=dtype) for name, shape in cls.parameter_shapes(config).items()
        })

    @classmethod
    def initialize(cls, config: ModelConfig, output_scale: float = 1e-2) -> "PredictorModel":
        """Uniform fan-in initialisation; the small output layer starts close to a zero-velocity predictor"""
        rng = np.random.default_rng(config.init_seed)
        shapes = cls.parameter_shapes(config)
        params = {}
        for name, shape in shapes.items():
            if name.endswith("bias") or name.split(".")[-1].startswith("b_"):
                params[name] = np.zeros(shape)
            elif name.startswith("output_projection"):
                params[name] = rng.uniform(-1.0, 1.0, size=shape) * output_scale / np.sqrt(shape[1])
            else:
                bound = 1.0 / np.sqrt(shape[1])
                params[name] = rng.uniform(-bound, bound, size=shape)
        return cls.from_parameters(config, params)

    def parameters(self) -> "OrderedDict[str, np.ndarray]":
        params = OrderedDict()
        params["input_projection.weight"] = self.input_weight
        params["input_projection.bias"] = self.input_bias
        for layer, weights in enumerate(self.layers):
            for name, value in weights.tensors().items():
                params[f"gru.{layer}.{name}"] = value
        params["output_projection.weight"] = self.output_weight
        params["output_projection.bias"] = self.output_bias
        return params

    def copy(self) -> "PredictorModel":
        return self.from_parameters(self.config, {k: v.copy() for k, v in self.parameters().items()})

    def zero_gradients(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, np.zeros(value.shape)) for name, value in self.parameters().items())

    ##########################
    # Unrolled computation
    ##########################
    def _step(self, state: np.ndarray, velocity: np.ndarray, hidden: List[np.ndarray]):
        x = np.concatenate([state[:, self.recurrent_mask], velocity], axis=1)
        inp = x @ self.input_weight.T + self.input_bias
        new_hidden, caches = [], []
        for weights, h in zip(self.layers, hidden):
            inp, cache = gru_forward(weights, inp, h)
            new_hidden.append(inp)
            caches.append(cache)
        out = inp @ self.output_weight.T + self.output_bias
        return out, new_hidden, StepCache(x=x, layers=caches, top=inp)

    def _step_backward(self, cache: StepCache, g_out: np.ndarray, g_hidden: List[np.ndarray],
                       grads: Optional[Dict[str, np.ndarray]]):
        if grads is not None:
            grads["output_projection.weight"] += g_out.T @ cache.top
            grads["output_projection.bias"] += g_out.sum(axis=0)
        g_inp = g_out @ self.output_weight + g_hidden[-1]
        new_g_hidden = [None] * len(self.layers)
        for layer in reversed(range(len(self.layers))):
            layer_grads = None
            if grads is not None:
                layer_grads = {name: grads[f"gru.{layer}.{name}"] for name in GruLayerWeights.shapes(1, 1)}
            dx, dh = gru_backward(self.layers[layer], cache.layers[layer], g_inp, layer_grads)
            new_g_hidden[layer] = dh
            g_inp = dx + g_hidden[layer - 1] if layer > 0 else dx
        if grads is not None:
            grads["input_projection.weight"] += g_inp.T @ cache.x
            grads["input_projection.bias"] += g_inp.sum(axis=0)
        return g_inp @ self.input_weight, new_g_hidden

    def unroll(self, observed: np.ndarray, horizon: int, delta: Optional[np.ndarray] = None,
               keep_cache: bool = True) -> BatchRollout:
        """Batched encoder-decoder pass; observed is (B, n, D), delta (B, T, D)"""
        observed = np.asarray(observed, dtype=float)
        if observed.ndim != 3 or observed.shape[2] != self.state_dim:
            raise DimensionMismatchError(
                f"Observed batch must be (B, n, {self.state_dim}), got {observed.shape}")
        batch, frames, dim = observed.shape
        if frames < 2:
            raise ModelError(f"Rollout needs at least 2 observed frames, got {frames}")
        if horizon < 1:
            raise ModelError(f"Horizon must be at least 1, got {horizon}")
        if delta is not None and delta.shape != (batch, horizon, dim):
            raise DimensionMismatchError(f"Delta has shape {delta.shape}, expected {(batch, horizon, dim)}")

        velocity = velocities_of(observed)
        hidden = [np.zeros((batch, self.hidden_size)) for _ in self.layers]
        encoder_caches, decoder_caches = [], []
        encoder_predictions = np.empty((batch, frames - 1, dim))
        for i in range(frames - 1):
            out, hidden, cache = self._step(observed[:, i], velocity[:, i], hidden)
            encoder_predictions[:, i] = observed[:, i] + out
            if keep_cache:
                encoder_caches.append(cache)

        states = np.empty((batch, horizon, dim))
        velocities = np.empty((batch, horizon, dim))
        s, u = observed[:, -1], velocity[:, -1]
        for k in range(horizon):
            out, hidden, cache = self._step(s, u, hidden)
            u = out + delta[:, k] if delta is not None else out
            s = s + u
            states[:, k] = s
            velocities[:, k] = u
            if keep_cache:
                decoder_caches.append(cache)

        cache = UnrollCache(encoder_caches, decoder_caches, batch) if keep_cache else None
        return BatchRollout(states, velocities, encoder_predictions, cache)

    def backward(self, cache: Optional[UnrollCache], grad_states: np.ndarray,
                 grad_encoder: Optional[np.ndarray] = None, parameter_grads: bool = False):
        """Backpropagation through time over the unrolled rollout.

        grad_states is dL/ds' for the decoder states (B, T, D); grad_encoder is
        dL/d(encoder prediction) (B, n-1, D). Returns (dL/d delta, parameter
        gradients or None).
        """
        if cache is None or not cache.decoder:
            raise MissingActivationsError("Rollout was computed without cached activations")
        batch, horizon, dim = grad_states.shape
        if horizon != len(cache.decoder) or batch != cache.batch:
            raise DimensionMismatchError(
                f"Upstream gradient has shape {grad_states.shape}, rollout is {(cache.batch, len(cache.decoder), dim)}")
        mask = self.recurrent_mask
        n_masked = int(mask.sum())
        grads = self.zero_gradients() if parameter_grads else None

        g_hidden = [np.zeros((batch, self.hidden_size)) for _ in self.layers]
        g_s_carry = np.zeros((batch, dim))
        g_u_carry = np.zeros((batch, dim))
        g_delta = np.empty((batch, horizon, dim))
        for k in reversed(range(horizon)):
            g_s = grad_states[:, k] + g_s_carry
            g_u = g_u_carry + g_s
            g_delta[:, k] = g_u
            dx, g_hidden = self._step_backward(cache.decoder[k], g_u, g_hidden, grads)
            g_s_carry = g_s.copy()
            g_s_carry[:, mask] += dx[:, :n_masked]
            g_u_carry = dx[:, n_masked:]

        if parameter_grads:
            if grad_encoder is None:
                grad_encoder = np.zeros((batch, len(cache.encoder), dim))
            if len(cache.encoder) != grad_encoder.shape[1]:
                raise MissingActivationsError("Encoder activations were not cached")
            for i in reversed(range(len(cache.encoder))):
                _, g_hidden = self._step_backward(cache.encoder[i], grad_encoder[:, i], g_hidden, grads)
        return g_delta, grads


def _observed_array(model: PredictorModel, observed: Union[Trajectory, np.ndarray]) -> np.ndarray:
    states = observed.states if isinstance(observed, Trajectory) else np.asarray(observed, dtype=float)
    if states.ndim != 2 or states.shape[1] != model.state_dim:
        raise DimensionMismatchError(
            f"Observed trajectory must be (frames, {model.state_dim}), got {states.shape}")
    if len(states) == 0:
        raise ModelError("Observed trajectory is empty")
    return states


def _delta_array(model: PredictorModel, delta, horizon: int) -> Optional[np.ndarray]:
    if delta is None:
        return None
    values = delta.effective() if isinstance(delta, DeltaInput) else np.asarray(delta, dtype=float)
    if values.shape != (horizon, model.state_dim):
        raise DimensionMismatchError(
            f"Delta has shape {values.shape}, expected {(horizon, model.state_dim)}")
    return values


def rollout(model: PredictorModel, observed: Union[Trajectory, np.ndarray],
            delta: Union[DeltaInput, np.ndarray, None] = None, horizon: Optional[int] = None,
            keep_cache: bool = True) -> RolloutResult:
    """Predict s'_(t+1:T) = f(s_(0:t), delta_(t+1:T))"""
    states = _observed_array(model, observed)
    if horizon is None:
        if delta is None:
            raise ModelError("Either a horizon or a delta input is required")
        horizon = len(delta.values if isinstance(delta, DeltaInput) else delta)
    values = _delta_array(model, delta, horizon)
    batch = model.unroll(states[None], horizon, None if values is None else values[None], keep_cache)
    return RolloutResult(batch.states[0], batch.velocities[0], batch.encoder_predictions[0], batch.cache)


def grad_delta(model: PredictorModel, observed: Union[Trajectory, np.ndarray],
               delta: Union[DeltaInput, np.ndarray, None], horizon: int, upstream: np.ndarray,
               result: Optional[RolloutResult] = None) -> np.ndarray:
    """Vector-Jacobian product dL/d delta given dL/ds' for every predicted step"""
    if result is None:
        result = rollout(model, observed, delta, horizon, keep_cache=True)
    if result.cache is None:
        raise MissingActivationsError("Rollout result carries no cached activations")
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != result.states.shape:
        raise DimensionMismatchError(f"Upstream gradient has shape {upstream.shape}, expected {result.states.shape}")
    g_delta, _ = model.backward(result.cache, upstream[None])
    g_delta = g_delta[0]
    if isinstance(delta, DeltaInput) and delta.mask is not None:
        g_delta = g_delta * delta.mask
    return g_delta
