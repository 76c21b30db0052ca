"""Full-batch Adam training over the global multi-task loss."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import network

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Raised when a loss or gradient becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 4000
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    dev_every: int = 0  # 0 disables dev-set loss tracking

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adam_step(params, grads, state: AdamState, cfg: TrainConfig, lr=None):
    """One bias-corrected Adam update.

    Returns new ``(params, state)``; the inputs are not modified.
    """
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            bad = int(np.sum(~np.isfinite(g)))
            raise TrainingDiverged(f"non-finite gradient in {k!r} ({bad} entries) at step {state.t + 1}")
    lr = cfg.learning_rate if lr is None else lr
    t = state.t + 1
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    new_params, m, v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m[k] = cfg.beta1 * state.m.get(k, 0.0) + (1.0 - cfg.beta1) * g
        v[k] = cfg.beta2 * state.v.get(k, 0.0) + (1.0 - cfg.beta2) * (g * g)
        m_hat = m[k] / bc1
        v_hat = v[k] / bc2
        new_params[k] = p - lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return new_params, AdamState(m, v, t)


@dataclass
class TrainTrace:
    branch_names: tuple[str, ...]
    global_loss: list[float] = field(default_factory=list)
    branch_loss: list[dict[str, float]] = field(default_factory=list)
    dev_loss: dict[int, float] = field(default_factory=dict)

    def __len__(self):
        return len(self.global_loss)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "global_loss"] + [f"branch_{n}_loss" for n in self.branch_names])
            for epoch, (g, per) in enumerate(zip(self.global_loss, self.branch_loss), start=1):
                w.writerow([epoch, repr(g)] + [repr(per[n]) for n in self.branch_names])


def train(spec, params, x, y, cfg: TrainConfig,
          dev: tuple[np.ndarray, np.ndarray] | None = None,
          lr_schedule: Callable[[int], float] | None = None):
    """Run ``cfg.epochs`` full-batch Adam steps on normalized targets ``y``.

    ``lr_schedule`` maps the 1-based epoch to a learning rate; by default the
    rate is constant.  The trace records the loss of the parameters *before*
    each epoch's update.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) == 0:
        raise ValueError("empty training set")
    state = AdamState.zeros_like(params)
    trace = TrainTrace(tuple(b.name for b in spec.branches))
    for epoch in range(1, cfg.epochs + 1):
        grads, total, per_branch = network.backward(spec, params, x, y, return_loss=True)
        if not np.isfinite(total):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        trace.global_loss.append(total)
        trace.branch_loss.append(per_branch)
        if dev is not None and cfg.dev_every and epoch % cfg.dev_every == 0:
            out = network.forward(spec, params, dev[0])
            trace.dev_loss[epoch] = network.loss(spec, out, dev[1])[0]
        lr = lr_schedule(epoch) if lr_schedule is not None else None
        try:
            params, state = adam_step(params, grads, state, cfg, lr=lr)
        except TrainingDiverged as exc:
            raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc
        if epoch % 500 == 0:
            log.debug("epoch %d loss %.6g", epoch, total)
    return params, trace
