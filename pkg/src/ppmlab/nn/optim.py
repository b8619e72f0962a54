"""Optimizers and learning-rate schedulers.

L2 penalties (global weight decay plus any per-parameter coefficient) and
the L1 penalty enter as gradient terms at step time, which is the exact
gradient of adding the penalties to the loss.

Schedulers map an epoch index (0-based) to the learning rate used during
that epoch. ReduceOnPlateau is stateful and must be stepped with the
validation metric each epoch.
"""
from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import ContractError, ValidityError
from .config import OptimSpec
from .tensor import Parameter

log = logging.getLogger("ppmlab.optim")


class Optimizer:
    def __init__(self, params: list[Parameter], spec: OptimSpec):
        self.params = list(params)
        self.spec = spec
        self.lr = spec.learning_rate
        self.t = 0
        self._state: dict[int, dict] = {}
        if spec.weight_decay:
            doubled = [p.name for p in self.params if getattr(p, "l2", 0.0)]
            if doubled:
                combined = spec.weight_decay + max(p.l2 for p in self.params if p.l2)
                log.debug("weight decay and per-layer L2 both active on %d params (max combined %.3g)",
                          len(doubled), combined)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def _adjusted_grad(self, p: Parameter) -> np.ndarray:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        l2 = self.spec.weight_decay + getattr(p, "l2", 0.0)
        if l2:
            g = g + l2 * p.data
        if self.spec.l1_coeff:
            g = g + self.spec.l1_coeff * np.sign(p.data)
        return g

    def step(self) -> None:
        self.t += 1
        for p in self.params:
            g = self._adjusted_grad(p)
            state = self._state.setdefault(id(p), {})
            self._update(p, g, state)

    def _update(self, p, g, state):
        raise NotImplementedError


class SGD(Optimizer):
    def _update(self, p, g, state):
        if self.spec.momentum:
            buf = state.setdefault("buf", np.zeros_like(p.data))
            buf *= self.spec.momentum
            buf += g
            g = buf
        p.data -= self.lr * g


class Adam(Optimizer):
    def _update(self, p, g, state):
        b1, b2 = self.spec.betas
        m = state.setdefault("m", np.zeros_like(p.data))
        v = state.setdefault("v", np.zeros_like(p.data))
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** self.t)
        v_hat = v / (1 - b2 ** self.t)
        p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.spec.eps)


class RMSprop(Optimizer):
    def _update(self, p, g, state):
        a = self.spec.alpha
        sq = state.setdefault("sq", np.zeros_like(p.data))
        sq *= a
        sq += (1 - a) * g * g
        scaled = g / (np.sqrt(sq) + self.spec.eps)
        if self.spec.momentum:
            buf = state.setdefault("buf", np.zeros_like(p.data))
            buf *= self.spec.momentum
            buf += scaled
            scaled = buf
        p.data -= self.lr * scaled


def make_optimizer(params: list[Parameter], spec: OptimSpec) -> Optimizer:
    cls = {"sgd": SGD, "adam": Adam, "rmsprop": RMSprop}[spec.optimizer]
    return cls(params, spec)


class Scheduler:
    """Base: returns the constant base learning rate."""

    needs_metric = False

    def __init__(self, base_lr: float, params: dict):
        self.base_lr = base_lr
        self.params = params

    def lr_at(self, epoch: int, metric: float | None = None) -> float:
        return self.base_lr


class StepLR(Scheduler):
    def lr_at(self, epoch, metric=None):
        step = int(self.params.get("step_size", 30))
        gamma = self.params.get("gamma", 0.1)
        return self.base_lr * gamma ** (epoch // step)


class ExponentialLR(Scheduler):
    def lr_at(self, epoch, metric=None):
        return self.base_lr * self.params.get("gamma", 0.95) ** epoch


class PolynomialLR(Scheduler):
    def lr_at(self, epoch, metric=None):
        total = int(self.params.get("total_iters", 100))
        power = self.params.get("power", 1.0)
        frac = min(epoch, total) / total
        return self.base_lr * (1.0 - frac) ** power


class CosineAnnealingLR(Scheduler):
    def lr_at(self, epoch, metric=None):
        t_max = int(self.params.get("t_max", 100))
        eta_min = self.params.get("eta_min", 0.0)
        return eta_min + (self.base_lr - eta_min) * (1 + math.cos(math.pi * epoch / t_max)) / 2


class CyclicLR(Scheduler):
    """Triangular cycle between base_lr and max_lr."""

    def lr_at(self, epoch, metric=None):
        max_lr = self.params.get("max_lr", self.base_lr * 10)
        up = int(self.params.get("step_size_up", 20))
        down = int(self.params.get("step_size_down", up))
        pos = epoch % (up + down)
        frac = pos / up if pos < up else 1.0 - (pos - up) / down
        return self.base_lr + (max_lr - self.base_lr) * frac


class OneCycleLR(Scheduler):
    """Warm up to max_lr over pct_start of the run, then cosine-anneal down.

    Start lr is max_lr / div_factor (default 25); final lr is
    max_lr / (div_factor * final_div_factor) (default final 1e4).
    """

    def lr_at(self, epoch, metric=None):
        max_lr = self.params.get("max_lr", self.base_lr * 10)
        total = int(self.params.get("total_steps", 100))
        pct = self.params.get("pct_start", 0.3)
        div = self.params.get("div_factor", 25.0)
        final_div = self.params.get("final_div_factor", 1e4)
        start_lr = max_lr / div
        end_lr = start_lr / final_div
        warm = max(1, int(round(pct * total)))
        epoch = min(epoch, total)
        if epoch < warm:
            frac = epoch / warm
            return start_lr + (max_lr - start_lr) * (1 - math.cos(math.pi * frac)) / 2
        frac = (epoch - warm) / max(1, total - warm)
        return end_lr + (max_lr - end_lr) * (1 + math.cos(math.pi * frac)) / 2


class InverseTimeLR(Scheduler):
    def lr_at(self, epoch, metric=None):
        decay = self.params.get("decay_rate", 0.1)
        return self.base_lr / (1.0 + decay * epoch)


class PiecewiseConstantLR(Scheduler):
    """Absolute learning rates switching at epoch boundaries.

    values has one more entry than boundaries; values[i] applies while
    epoch < boundaries[i], the last value afterwards.
    """

    def lr_at(self, epoch, metric=None):
        boundaries = list(self.params.get("boundaries", []))
        values = list(self.params.get("values", [self.base_lr]))
        if len(values) != len(boundaries) + 1:
            raise ValidityError("piecewise_constant: len(values) must be len(boundaries) + 1")
        for b, v in zip(boundaries, values):
            if epoch < b:
                return v
        return values[-1]


class ReduceOnPlateauLR(Scheduler):
    """Multiplies the lr by `factor` after `patience` epochs without
    improving the (maximized) metric by more than `threshold`."""

    needs_metric = True

    def __init__(self, base_lr, params):
        super().__init__(base_lr, params)
        self.current = base_lr
        self.best = -math.inf
        self.bad_epochs = 0

    def lr_at(self, epoch, metric=None):
        if metric is None:
            raise ContractError("reduce_on_plateau requires the validation metric")
        threshold = self.params.get("threshold", 1e-4)
        patience = int(self.params.get("patience", 10))
        factor = self.params.get("factor", 0.1)
        min_lr = self.params.get("min_lr", 0.0)
        if metric > self.best + threshold:
            self.best = metric
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs > patience:
                self.current = max(self.current * factor, min_lr)
                self.bad_epochs = 0
        return self.current


_SCHEDULERS = {
    "step": StepLR,
    "exponential": ExponentialLR,
    "reduce_on_plateau": ReduceOnPlateauLR,
    "polynomial": PolynomialLR,
    "cosine_annealing": CosineAnnealingLR,
    "cyclic": CyclicLR,
    "one_cycle": OneCycleLR,
    "inverse_time": InverseTimeLR,
    "piecewise_constant": PiecewiseConstantLR,
}


def make_scheduler(spec: OptimSpec) -> Scheduler:
    if spec.scheduler is None:
        return Scheduler(spec.learning_rate, {})
    return _SCHEDULERS[spec.scheduler](spec.learning_rate, dict(spec.scheduler_params))


def scheduler_lr(spec: OptimSpec, epoch: int, metric: float | None = None) -> float:
    """Stateless view of the schedule (plateau schedules need the object)."""
    return make_scheduler(spec).lr_at(epoch, metric)
