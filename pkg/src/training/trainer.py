import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.model.predictor import PredictorModel
from src.training.dataset import Batch, Sample, TrainingError, augment_heading
from src.training.loss import motion_loss_and_grad
from src.types import TrainingConfig

logger = logging.getLogger("training.trainer")


class TrainingDivergedError(TrainingError):
    """Raised when the training loss stops being finite"""
    code = "training-diverged"


@dataclass
class LossCurve:
    epochs: List[int] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)
    holdout_loss: List[Optional[float]] = field(default_factory=list)

    def append(self, epoch: int, train: float, holdout: Optional[float]) -> None:
        self.epochs.append(epoch)
        self.train_loss.append(train)
        self.holdout_loss.append(holdout)

    def __len__(self) -> int:
        return len(self.epochs)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"epoch": self.epochs, "train_loss": self.train_loss,
                             "holdout_loss": self.holdout_loss})

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


@dataclass
class TrainingResult:
    model: PredictorModel
    curve: LossCurve


class Adam:
    """Adaptive-moment update applied in place to the model's parameter arrays"""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for name, value in params.items():
            g = grads[name]
            m = self.m.setdefault(name, np.zeros(g.shape))
            v = self.v.setdefault(name, np.zeros(g.shape))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            value -= (self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)).astype(value.dtype)


def clip_gradients(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def batch_loss(model: PredictorModel, batch: Batch,
               with_gradients: bool = True) -> Tuple[float, Optional[Dict[str, np.ndarray]]]:
    """Loss over the whole window: one-step-ahead predictions of the observed
    frames plus the closed-loop prediction of the target frames, averaged over
    the batch."""
    observed = batch.observed
    target = batch.target
    delta = np.zeros(target.shape)
    # the perturbation input stays at zero while training
    assert not np.any(delta)
    out = model.unroll(observed, target.shape[1], delta, keep_cache=with_gradients)
    enc_value, enc_grad = motion_loss_and_grad(out.encoder_predictions, observed[:, 1:])
    dec_value, dec_grad = motion_loss_and_grad(out.states, target)
    n = len(batch)
    value = (enc_value + dec_value) / n
    if not with_gradients:
        return value, None
    _, grads = model.backward(out.cache, dec_grad / n, enc_grad / n, parameter_grads=True)
    return value, grads


def mean_loss(model: PredictorModel, samples: Sequence[Sample], batch_size: int) -> Optional[float]:
    if not samples:
        return None
    total = 0.0
    for start in range(0, len(samples), batch_size):
        batch = Batch(list(samples[start:start + batch_size]))
        value, _ = batch_loss(model, batch, with_gradients=False)
        total += value * len(batch)
    return total / len(samples)


def _check_finite(value: Optional[float], epoch: int, what: str) -> None:
    if value is not None and not np.isfinite(value):
        raise TrainingDivergedError(f"{what} loss became non-finite at epoch {epoch}")


def train(model: PredictorModel, samples: Sequence[Sample], config: TrainingConfig,
          holdout: Sequence[Sample] = ()) -> TrainingResult:
    """Minibatch Adam over the sliced samples; the input model is left untouched"""
    samples = list(samples)
    holdout = list(holdout)
    if not samples:
        raise TrainingError("Training needs at least one sample")
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    optimizer = Adam(config.learning_rate)
    params = model.parameters()

    curve = LossCurve()
    initial = mean_loss(model, samples, config.batch_size)
    initial_holdout = mean_loss(model, holdout, config.batch_size)
    _check_finite(initial, 0, "training")
    curve.append(0, initial, initial_holdout)
    logger.info(f"Epoch 0: train loss {initial:.6f}" +
                (f", holdout loss {initial_holdout:.6f}" if initial_holdout is not None else ""))

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(samples))
        for start in range(0, len(order), config.batch_size):
            picked = [samples[i] for i in order[start:start + config.batch_size]]
            if config.augment_heading:
                picked = [augment_heading(s, rng) for s in picked]
            value, grads = batch_loss(model, Batch(picked))
            _check_finite(value, epoch, "training")
            clip_gradients(grads, config.grad_clip)
            optimizer.step(params, grads)

        train_value = mean_loss(model, samples, config.batch_size)
        holdout_value = mean_loss(model, holdout, config.batch_size)
        _check_finite(train_value, epoch, "training")
        _check_finite(holdout_value, epoch, "holdout")
        curve.append(epoch, train_value, holdout_value)
        logger.info(f"Epoch {epoch}: train loss {train_value:.6f}" +
                    (f", holdout loss {holdout_value:.6f}" if holdout_value is not None else ""))

    return TrainingResult(model=model, curve=curve)
