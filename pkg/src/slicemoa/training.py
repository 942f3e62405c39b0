"""Training loop: Adam with decoupled weight decay, early stopping, and
validation-based model selection.

Each epoch shuffles the training set (seeded stream), steps over minibatches,
then scores the selection metric on the validation split; the best-scoring
parameter snapshot is restored at the end. Training stops early once the
metric has not improved for ``patience`` consecutive epochs. One structured
log record is emitted per epoch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import metrics as met
from . import rng as rng_mod
from .errors import ConfigError, NumericError
from .model import Model, make_rngs

SELECTION_METRICS = ("accuracy", "overall_f1", "mcc")


@dataclass
class TrainConfig:
    lr: float = 0.001
    weight_decay: float = 0.0
    max_epochs: int = 500
    patience: int = 50
    batch_size: int = 32
    seed: int = 0
    selection_metric: str = "accuracy"
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    f1_average: str = "macro"  # used for multi-class overall_f1

    def validate(self) -> "TrainConfig":
        if not self.lr > 0:
            raise ConfigError(f"train.lr: must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"train.weight_decay: must be non-negative, got {self.weight_decay}")
        if self.patience < 1:
            raise ConfigError(f"train.patience: must be at least 1, got {self.patience}")
        if self.max_epochs < 1 or self.patience > self.max_epochs:
            raise ConfigError(
                f"train: need 1 <= patience <= max_epochs (patience={self.patience}, max_epochs={self.max_epochs})"
            )
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size: must be positive, got {self.batch_size}")
        if self.selection_metric not in SELECTION_METRICS:
            raise ConfigError(
                f"train.selection_metric: expected one of {SELECTION_METRICS}, got {self.selection_metric!r}"
            )
        return self

    def to_record(self) -> dict:
        return {
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "selection_metric": self.selection_metric,
        }


class Adam:
    """Adam with bias correction and decoupled weight decay.

    Weight decay shrinks parameters by lr*wd directly rather than entering
    the moment estimates, so a zero-gradient step decays exactly.
    """

    def __init__(self, params: dict, lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if np.isnan(g).any():
                raise NumericError(f"NaN gradient in parameter {name!r}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data
            p.data -= self.lr * update

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


@dataclass
class TrainState:
    epoch: int = 0
    best_score: float = -np.inf
    best_epoch: int = -1
    best_params: dict | None = None
    since_improvement: int = 0
    history: list[dict] = field(default_factory=list)


@dataclass
class Split:
    """One split's aligned arrays."""

    X: np.ndarray       # [n, d] embeddings
    gamma: np.ndarray   # [n, k] memberships
    y: np.ndarray       # [n] labels

    def __len__(self):
        return len(self.y)


def selection_score(name: str, predictions, labels, num_classes: int, f1_average: str = "macro") -> float:
    if name == "accuracy":
        return met.compute_metric("accuracy", predictions, labels, num_classes)
    if name == "overall_f1":
        return met.compute_metric("f1", predictions, labels, num_classes, f1_average=f1_average)
    if name == "mcc":
        return met.compute_metric("mcc", predictions, labels, num_classes)
    raise ConfigError(f"unknown selection metric {name!r}")


def train(model: Model, train_split: Split, val_split: Split, cfg: TrainConfig,
          log_path=None) -> TrainState:
    """Optimize the model; returns the state with the best snapshot restored."""
    cfg.validate()
    if len(train_split) == 0:
        raise ConfigError("train: training split is empty")
    if len(val_split) == 0:
        raise ConfigError("train: validation split is empty")

    optimizer = Adam(model.params, lr=cfg.lr, betas=cfg.betas, eps=cfg.eps,
                     weight_decay=cfg.weight_decay)
    shuffle = rng_mod.stream(cfg.seed, "shuffle")
    rngs = make_rngs(cfg.seed)
    state = TrainState(best_params=model.state_dict())
    num_classes = model.cfg.C

    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            order = shuffle.permutation(len(train_split))
            sums = {"loss": 0.0, "zeta1": 0.0, "zeta2": 0.0, "zeta3": 0.0}
            batches = 0
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                total, comps = model.loss(
                    train_split.X[idx], train_split.gamma[idx], train_split.y[idx],
                    training=True, rngs=rngs,
                )
                if not np.isfinite(total.item()):
                    raise NumericError(f"non-finite loss at epoch {epoch}")
                optimizer.zero_grad()
                total.backward()
                optimizer.step()
                for key in sums:
                    sums[key] += comps[key]
                batches += 1
            means = {key: sums[key] / batches for key in sums}

            preds = model.predict(val_split.X)
            score = selection_score(cfg.selection_metric, preds, val_split.y, num_classes, cfg.f1_average)
            state.epoch = epoch
            record = {
                "epoch": epoch,
                "loss": means["loss"],
                "zeta1": means["zeta1"],
                "zeta2": means["zeta2"],
                "zeta3": means["zeta3"],
                "val_metric": score,
            }
            state.history.append(record)
            if log_fh:
                log_fh.write(json.dumps(record, sort_keys=True) + "\n")

            if score > state.best_score:
                state.best_score = score
                state.best_epoch = epoch
                state.best_params = model.state_dict()
                state.since_improvement = 0
            else:
                state.since_improvement += 1
                if state.since_improvement >= cfg.patience:
                    break
    finally:
        if log_fh:
            log_fh.close()

    model.load_state_dict(state.best_params)
    return state
