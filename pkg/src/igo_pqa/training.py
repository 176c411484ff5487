"""Optimization loop for the score regressor.

L1 regression loss (L2 selectable), decoupled-weight-decay Adam, and a
triangular cyclic learning-rate schedule.  The loop is fully seeded:
the same TrainConfig reproduces the loss curve bit-for-bit in
single-worker mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import LengthMismatch, NonFiniteLoss, ShapeMismatch
from .metrics import MetricReport, metric_report
from .model import ScoreRegressor

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    base_lr: float = 4e-4
    max_lr: float = 2e-3
    cycle_len: int = 16
    weight_decay: float = 0.01
    grad_clip: float = 10.0
    seed: int = 0
    loss: str = "l1"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0 < self.base_lr <= self.max_lr:
            raise ValueError(
                f"need 0 < base_lr <= max_lr, got {self.base_lr}, {self.max_lr}"
            )
        if self.cycle_len < 2:
            raise ValueError(f"cycle_len must be >= 2, got {self.cycle_len}")
        if self.weight_decay < 0 or self.grad_clip <= 0:
            raise ValueError("weight_decay must be >= 0 and grad_clip > 0")
        if self.loss not in ("l1", "l2"):
            raise ValueError(f"loss must be 'l1' or 'l2', got {self.loss!r}")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size,
            "base_lr": self.base_lr, "max_lr": self.max_lr,
            "cycle_len": self.cycle_len, "weight_decay": self.weight_decay,
            "grad_clip": self.grad_clip, "seed": self.seed, "loss": self.loss,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        return cls(**payload)


def l1_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute error; the subgradient at exact ties is 0."""
    t = np.asarray(target, dtype=pred.dtype).ravel()
    if pred.values.ravel().shape != t.shape:
        raise LengthMismatch(f"pred {pred.shape} vs target {t.shape}")
    return ad.tmean(ad.tabs(pred - Tensor(t.reshape(pred.shape))))


def l2_loss(pred: Tensor, target) -> Tensor:
    t = np.asarray(target, dtype=pred.dtype).ravel()
    if pred.values.ravel().shape != t.shape:
        raise LengthMismatch(f"pred {pred.shape} vs target {t.shape}")
    diff = pred - Tensor(t.reshape(pred.shape))
    return ad.tmean(ad.mul(diff, diff))


LOSSES = {"l1": l1_loss, "l2": l2_loss}


def cyclic_lr(step: int, base_lr: float, max_lr: float, cycle_len: int) -> float:
    """Triangular schedule: base -> max over a half cycle, back down, repeat."""
    pos = step % cycle_len
    half = cycle_len / 2.0
    frac = pos / half if pos <= half else (cycle_len - pos) / half
    return base_lr + (max_lr - base_lr) * frac


def init_adam_state(params: dict) -> dict:
    return {
        "t": 0,
        "m": {name: np.zeros_like(p) for name, p in params.items()},
        "v": {name: np.zeros_like(p) for name, p in params.items()},
    }


def adamw_step(params: dict, grads: dict, state: dict, lr: float,
               beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS,
               weight_decay=0.0) -> None:
    """One decoupled-weight-decay Adam update, in place on the arrays."""
    state["t"] += 1
    t = state["t"]
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.shape}")
        m = state["m"][name]
        v = state["v"][name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        if weight_decay:
            p -= lr * weight_decay * p


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    """Scale all grads so their global L2 norm is at most max_norm."""
    total = 0.0
    for g in grads.values():
        total += float((g.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for g in grads.values():
            g *= np.asarray(factor, dtype=g.dtype)
    return norm


@dataclass
class TrainResult:
    model: ScoreRegressor
    loss_curve: list = field(default_factory=list)
    steps: int = 0

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1] if self.loss_curve else float("nan")


def _batches(perm, batch_size):
    for start in range(0, perm.shape[0], batch_size):
        yield perm[start:start + batch_size]


def train(model: ScoreRegressor, clouds, targets,
          config: TrainConfig = TrainConfig(),
          on_epoch=None) -> TrainResult:
    """Fit the model to (cloud, score) pairs; see module docstring.

    ``on_epoch(epoch, mean_loss)`` is called after each epoch when given.
    """
    clouds = list(clouds)
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if not clouds:
        raise LengthMismatch("empty train set")
    if targets.shape[0] != len(clouds):
        raise LengthMismatch(
            f"{len(clouds)} clouds vs {targets.shape[0]} targets")
    if not np.isfinite(targets).all():
        raise NonFiniteLoss("non-finite training target")
    loss_fn = LOSSES[config.loss]
    rng = np.random.default_rng(config.seed)
    values = {name: t.values for name, t in model.params.items()}
    state = init_adam_state(values)
    result = TrainResult(model=model)
    step = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(len(clouds))
        epoch_losses = []
        for batch in _batches(perm, config.batch_size):
            for t in model.params.values():
                t.grad = None
            preds = [ad.reshape(model.forward(clouds[i]), (1,)) for i in batch]
            pred_vec = ad.concat(preds) if len(preds) > 1 else preds[0]
            loss = loss_fn(pred_vec, targets[batch])
            loss_value = float(loss.values)
            if not np.isfinite(loss_value):
                raise NonFiniteLoss(
                    f"loss became {loss_value} at epoch {epoch}, step {step}")
            loss.backward()
            grads = {
                name: (t.grad if t.grad is not None
                       else np.zeros_like(t.values))
                for name, t in model.params.items()
            }
            clip_grad_norm(grads, config.grad_clip)
            lr = cyclic_lr(step, config.base_lr, config.max_lr, config.cycle_len)
            adamw_step(values, grads, state, lr,
                       weight_decay=config.weight_decay)
            epoch_losses.append(loss_value)
            step += 1
        mean_loss = float(np.mean(epoch_losses))
        result.loss_curve.append(mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
    result.steps = step
    return result


def predict_many(model: ScoreRegressor, clouds) -> np.ndarray:
    return np.array([model.predict(cloud) for cloud in clouds], dtype=np.float64)


def evaluate(model: ScoreRegressor, clouds, targets) -> MetricReport:
    """Forward every cloud and report PLCC / SRCC / mean L1."""
    preds = predict_many(model, clouds)
    return metric_report(preds, np.asarray(targets, dtype=np.float64))
