"""SGD with momentum/weight decay, Adam, and the step learning-rate schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import DimensionError, Tensor


def _check(params: Sequence[Tensor], grads: Sequence[np.ndarray]) -> None:
    if len(params) != len(grads):
        raise DimensionError(f"got {len(params)} params but {len(grads)} grads")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise DimensionError(f"param shape {p.shape} != grad shape {np.shape(g)}")


def sgd_step(params, grads, lr, momentum=0.0, weight_decay=0.0, velocity=None):
    """One in-place SGD step; returns the updated velocity buffers.

    v <- momentum * v + grad + weight_decay * param ; param <- param - lr * v
    """
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    _check(params, grads)
    if velocity is None:
        velocity = [np.zeros_like(p.data) for p in params]
    for p, g, v in zip(params, grads, velocity):
        v *= momentum
        v += g
        if weight_decay:
            v += weight_decay * p.data
        p.data -= lr * v
    return velocity


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls([np.zeros_like(p.data) for p in params],
                   [np.zeros_like(p.data) for p in params])


def adam_step(params, grads, state: AdamState | None, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place, bias-corrected Adam step; returns the new state."""
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
    _check(params, grads)
    if state is None:
        state = AdamState.zeros(params)
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


class SGD:
    def __init__(self, params, lr, momentum=0.9, weight_decay=5e-4):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: dict) -> None:
        """Update every parameter that currently requires grad; frozen ones are skipped."""
        live = [i for i, p in enumerate(self.params) if p.requires_grad]
        params = [self.params[i] for i in live]
        g = [grads.get(p, np.zeros_like(p.data)) for p in params]
        sgd_step(params, g, self.lr, self.momentum, self.weight_decay,
                 [self.velocity[i] for i in live])


class Adam:
    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState.zeros(self.params)

    def step(self, grads: dict) -> None:
        """Frozen parameters keep their value and moments; the step counter still advances."""
        live = [i for i, p in enumerate(self.params) if p.requires_grad]
        params = [self.params[i] for i in live]
        g = [grads.get(p, np.zeros_like(p.data)) for p in params]
        sub = AdamState([self.state.m[i] for i in live], [self.state.v[i] for i in live],
                        self.state.t)
        adam_step(params, g, sub, self.lr, *self.betas, self.eps)
        self.state.t = sub.t


@dataclass(frozen=True)
class StepSchedule:
    """Piecewise-constant learning rate, divided by ``factor`` at each milestone.

    Milestones are fractions of the total epoch count; the defaults place
    them at epochs 150, 180 and 210 of 240.
    """

    base_lr: float = 0.05
    epochs: int = 240
    fractions: tuple[float, ...] = field(default=(150 / 240, 180 / 240, 210 / 240))
    factor: float = 10.0

    def __post_init__(self):
        ms = self.milestones()
        if any(b <= a for a, b in zip(ms, ms[1:])) or (ms and ms[0] < 1):
            raise ValueError(f"milestones {ms} for {self.epochs} epochs are not strictly increasing")

    def milestones(self) -> list[int]:
        # small epsilon keeps 150/240*240 from landing on 149 through rounding
        return [int(math.floor(f * self.epochs + 1e-9)) for f in self.fractions]

    def lr_at(self, epoch: int) -> float:
        drops = 0
        for m in self.milestones():
            if epoch >= m:
                drops += 1
        return self.base_lr / self.factor ** drops


class DivergenceError(RuntimeError):
    """A training loss went non-finite or exceeded the magnitude guard."""

    def __init__(self, phase: str, epoch: int, term: str, value: float):
        super().__init__(f"{phase}: {term} = {value!r} at epoch {epoch}")
        self.phase = phase
        self.epoch = epoch
        self.term = term
        self.value = value


LOSS_LIMIT = 1e6


def guard(phase: str, epoch: int, **losses: float) -> None:
    for term, value in losses.items():
        if not np.isfinite(value) or abs(value) > LOSS_LIMIT:
            raise DivergenceError(phase, epoch, term, value)
