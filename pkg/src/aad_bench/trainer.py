"""Training loop: prototype batches into the network, Adam or SGD updates.

Fixed budget, no early stopping, no validation split: the schedule is a
given number of epochs over prototype batches drawn from the training
windows. Evaluation runs the raw test windows (never prototypes) through the
eval-mode network and scores the argmax decisions.

Randomness is split into independent streams so results do not depend on
consumption order: parameter init uses seed stream [seed, 0], epoch e's
sampler uses [seed, 1, e].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .core_data import TfWindow
from .eegwavenet import (ModelGrads, ModelParams, backward, forward,
                         init_params, predict_batch, LEARNABLE_FIELDS)
from .prototype import PrototypeConfig, PrototypeSample, epoch_batches

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Optimizer(Enum):
    ADAM = "adam"
    SGD = "sgd"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.001
    optimizer: Optimizer = Optimizer.ADAM
    prototype: PrototypeConfig = field(default_factory=PrototypeConfig)
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")


@dataclass(eq=False)
class TrainedModel:
    params: ModelParams
    history: list[float]
    config: TrainConfig


class AdamState:
    """First/second moment accumulators with bias correction; a zero
    gradient leaves the parameters exactly unchanged."""

    def __init__(self, params: ModelParams):
        self.step = 0
        self.m = {n: np.zeros_like(getattr(params, n)) for n in LEARNABLE_FIELDS}
        self.v = {n: np.zeros_like(getattr(params, n)) for n in LEARNABLE_FIELDS}

    def apply(self, params: ModelParams, grads: ModelGrads, lr: float) -> None:
        self.step += 1
        c1 = 1.0 - ADAM_BETA1 ** self.step
        c2 = 1.0 - ADAM_BETA2 ** self.step
        for name in LEARNABLE_FIELDS:
            g = getattr(grads, name)
            m = self.m[name]
            v = self.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p = getattr(params, name)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def _sgd_apply(params: ModelParams, grads: ModelGrads, lr: float) -> None:
    for name in LEARNABLE_FIELDS:
        getattr(params, name)[...] -= lr * getattr(grads, name)


def _merged_batches(stream: Iterator[tuple[list[PrototypeSample], np.ndarray]]
                    ) -> Iterator[tuple[list[PrototypeSample], np.ndarray]]:
    """Fold a trailing batch of 1 into its predecessor; batch statistics need
    at least 2 examples."""
    held = None
    for item in stream:
        if held is not None:
            if len(item[0]) == 1:
                merged = (held[0] + item[0], np.concatenate([held[1], item[1]]))
                held = merged
                continue
            yield held
        held = item
    if held is not None:
        yield held


def train(train_windows: list[TfWindow], cfg: TrainConfig) -> TrainedModel:
    """Fit a fresh network on the given windows; deterministic per cfg.seed."""
    if not train_windows:
        raise ValueError("empty training set")
    c, t_w, f = train_windows[0].energy.shape
    dtype = np.dtype(cfg.dtype)
    params = init_params(c, t_w, f, np.random.SeedSequence([cfg.seed, 0]), dtype=dtype)
    adam = AdamState(params) if cfg.optimizer is Optimizer.ADAM else None

    history: list[float] = []
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, epoch]))
        stream = epoch_batches(train_windows, cfg.prototype, cfg.batch_size, rng)
        total = 0.0
        count = 0
        for samples, labels in _merged_batches(stream):
            batch = np.stack([s.energy for s in samples])
            if batch.dtype != dtype:
                batch = batch.astype(dtype)
            _, trace = forward(params, batch, mode="train")
            loss, grads = backward(params, trace, labels)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {count}; "
                    f"seed={cfg.seed} lr={cfg.learning_rate} k={cfg.prototype.k}"
                )
            if adam is not None:
                adam.apply(params, grads, cfg.learning_rate)
            else:
                _sgd_apply(params, grads, cfg.learning_rate)
            total += loss * len(samples)
            count += len(samples)
        history.append(total / count)
    return TrainedModel(params, history, cfg)


def evaluate_windows(model: TrainedModel, test_windows: list[TfWindow],
                     batch_size: int = 256) -> float:
    """Fraction of raw test windows whose eval-mode argmax matches the label."""
    if not test_windows:
        raise ValueError("empty test set")
    dtype = np.dtype(model.config.dtype)
    correct = 0
    for start in range(0, len(test_windows), batch_size):
        chunk = test_windows[start:start + batch_size]
        batch = np.stack([w.energy for w in chunk])
        if batch.dtype != dtype:
            batch = batch.astype(dtype)
        preds, _ = predict_batch(model.params, batch)
        labels = np.array([int(w.label) for w in chunk])
        correct += int((preds == labels).sum())
    return correct / len(test_windows)
