"""RMSprop mini-batch training, patience early stopping and two-stage retraining."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .layers import Model, mse_loss
from .numerics import ShapeMismatch

logger = logging.getLogger(__name__)


class EmptySplit(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    learning_rate: float = 0.001
    rho: float = 0.9
    epsilon: float = 1e-7
    seed: int = 0
    shuffle_each_epoch: bool = True
    warm_start: bool = False  # stage 2 continues from stage-1 weights instead of re-initialising
    head_bias: str = "target_mean"  # or "zero"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be >= 1")
        if self.head_bias not in ("target_mean", "zero"):
            raise ValueError(f"unknown head_bias {self.head_bias!r}")


class RMSprop:
    """s <- rho*s + (1-rho)*g^2;  p <- p - lr*g/(sqrt(s)+eps), all elementwise and in place."""

    def __init__(self, learning_rate=0.001, rho=0.9, epsilon=1e-7):
        self.learning_rate, self.rho, self.epsilon = learning_rate, rho, epsilon
        self.state: dict[str, np.ndarray] = {}

    @classmethod
    def from_config(cls, config: TrainConfig):
        return cls(config.learning_rate, config.rho, config.epsilon)

    def step(self, params: dict, grads: dict):
        for key, p in params.items():
            g = grads[key]
            if g.shape != p.shape:
                raise ShapeMismatch(f"{key}: grad {g.shape} vs param {p.shape}")
            s = self.state.get(key)
            if s is None:
                s = self.state[key] = np.zeros_like(p)
            elif s.shape != p.shape:
                raise ShapeMismatch(f"{key}: state {s.shape} vs param {p.shape}")
            s *= self.rho
            s += (1.0 - self.rho) * g * g
            p -= self.learning_rate * g / (np.sqrt(s) + self.epsilon)


def rmsprop_step(params, grads, state, config: TrainConfig):
    """Functional form: returns fresh ``(params, state)`` dicts, inputs untouched."""
    opt = RMSprop.from_config(config)
    opt.state = {k: np.array(v, dtype=np.float64) for k, v in state.items()}
    new = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    opt.step(new, {k: np.asarray(v, dtype=np.float64) for k, v in grads.items()})
    return new, opt.state


@dataclass
class TrainingCurves:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss"])
            for e, (tr, va) in enumerate(zip(self.train_loss, self.val_loss), start=1):
                w.writerow([e, repr(tr), repr(va)])


def iter_batches(n, batch_size, rng=None):
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_epoch(model: Model, x, y, config: TrainConfig, optimizer: RMSprop, rng) -> float:
    """One pass over ``(x, y)``; returns the mean of the per-batch losses."""
    if len(x) == 0:
        raise EmptySplit("training split is empty")
    params = model.parameters()
    losses = []
    for idx in iter_batches(len(x), config.batch_size, rng if config.shuffle_each_epoch else None):
        pred = model.forward(x[idx])
        loss, dpred = mse_loss(pred, y[idx])
        model.backward(dpred)
        optimizer.step(params, model.gradients())
        losses.append(loss)
    return float(np.mean(losses))


def evaluate_loss(model: Model, x, y) -> float:
    return mse_loss(model.predict(x), y)[0]


def _check_finite(model):
    for key, p in model.parameters().items():
        if not np.all(np.isfinite(p)):
            raise FloatingPointError(f"parameter {key} became non-finite")


def train_with_early_stopping(model: Model, train, val, config: TrainConfig):
    """Train until validation loss has not beaten its running minimum for more
    than ``patience`` epochs. Returns ``(best_epoch, curves)``; epochs are 1-indexed.
    """
    (xt, yt), (xv, yv) = train, val
    if len(xv) == 0:
        raise EmptySplit("validation split is empty")
    rng = np.random.default_rng(config.seed)
    opt = RMSprop.from_config(config)
    curves = TrainingCurves()
    best = np.inf
    for epoch in range(1, config.max_epochs + 1):
        curves.train_loss.append(train_epoch(model, xt, yt, config, opt, rng))
        _check_finite(model)
        v = evaluate_loss(model, xv, yv)
        curves.val_loss.append(v)
        if v < best:
            best, curves.best_epoch = v, epoch
        curves.stopped_epoch = epoch
        if epoch - curves.best_epoch > config.patience:
            break
    logger.debug("%s: best epoch %d, stopped at %d", model.name, curves.best_epoch, curves.stopped_epoch)
    return curves.best_epoch, curves


def early_stopping_epochs(val_losses, patience, max_epochs):
    """Replay the stopping rule on a precomputed loss sequence: ``(stopped, best)``."""
    best, best_epoch, epoch = np.inf, 0, 0
    for epoch, v in enumerate(val_losses[:max_epochs], start=1):
        if v < best:
            best, best_epoch = v, epoch
        if epoch - best_epoch > patience:
            break
    return epoch, best_epoch


def fit_epochs(model: Model, x, y, epochs: int, config: TrainConfig) -> list[float]:
    rng = np.random.default_rng(config.seed)
    opt = RMSprop.from_config(config)
    losses = []
    for _ in range(epochs):
        losses.append(train_epoch(model, x, y, config, opt, rng))
        _check_finite(model)
    return losses


def init_head_bias(model: Model, y, config: TrainConfig) -> Model:
    """Start the output unit at the mean training target.

    With zero bias a ReLU output unit is often negative on every sample at
    initialisation and then never receives gradient.
    """
    if config.head_bias == "target_mean":
        model.layers[-1].params["b"][...] = float(np.mean(y))
    return model


@dataclass
class TwoStageResult:
    model: Model
    curves: TrainingCurves
    stage2_loss: list[float]
    stage2_samples: int


def two_stage_train(make_model, dataset, config: TrainConfig) -> TwoStageResult:
    """Early-stop on train/val to find an epoch budget, then retrain on
    train+val for exactly that many epochs.

    ``make_model(seed)`` must return a freshly initialised :class:`Model`.
    """
    x_tr, y_tr, *_ = dataset.part("train")
    x_va, y_va, *_ = dataset.part("val")
    x_all, y_all, *_ = dataset.part("trainval")
    model = init_head_bias(make_model(config.seed), y_tr, config)
    best_epoch, curves = train_with_early_stopping(model, (x_tr, y_tr), (x_va, y_va), config)
    if not config.warm_start:
        model = init_head_bias(make_model(config.seed), y_all, config)
    stage2 = fit_epochs(model, x_all, y_all, best_epoch, config)
    return TwoStageResult(model, curves, stage2, len(x_all))
