"""Plain SGD with a step learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import Tensor


@dataclass
class OptimizerState:
    """Step schedule: ``lr = base_lr * decay_factor ** (epoch // decay_period_epochs)``."""

    base_lr: float = 1e-3
    decay_period_epochs: int = 7
    decay_factor: float = 0.1
    current_epoch: int = 0

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if self.decay_period_epochs < 1:
            raise ValueError("decay_period_epochs must be >= 1")
        if not 0 < self.decay_factor < 1:
            raise ValueError("decay_factor must be in (0, 1)")
        if self.current_epoch < 0:
            raise ValueError("current_epoch must be >= 0")

    @property
    def lr(self) -> float:
        return lr_at(self.current_epoch, self.base_lr, self.decay_period_epochs, self.decay_factor)


def lr_at(epoch: int, base_lr: float = 1e-3, period: int = 7, factor: float = 0.1) -> float:
    steps = epoch // period
    # Dividing by 10**k keeps 1e-3 -> 1e-4 -> 1e-5 exact in binary floating point.
    if factor == 0.1:
        return base_lr / 10.0**steps
    return base_lr * factor**steps


def sgd_step(params: Iterable[Tensor], state: OptimizerState, momentum: float = 0.0, buffers: dict | None = None) -> None:
    """``w <- w - lr * grad`` for every parameter, then clear the gradients.

    With ``momentum > 0`` a heavy-ball velocity is kept in ``buffers`` (keyed
    by parameter identity) and applied instead of the raw gradient.
    """
    params = list(params)
    for p in params:
        if p.grad is None:
            raise ValueError(f"parameter {p.name or p.shape} has no gradient")
    lr = state.lr
    for p in params:
        g = p.grad
        if momentum:
            if buffers is None:
                raise ValueError("momentum needs a buffers dict")
            v = buffers.get(id(p))
            v = g.copy() if v is None else momentum * v + g
            buffers[id(p)] = v
            g = v
        p.data -= (lr * g).astype(p.data.dtype, copy=False)
        p.grad = None


class SGD:
    """Stateful wrapper pairing a parameter list with its schedule."""

    def __init__(self, params: Iterable[Tensor], state: OptimizerState | None = None, momentum: float = 0.0):
        self.params = list(params)
        self.state = state or OptimizerState()
        self.momentum = momentum
        self._buffers: dict[int, np.ndarray] = {}

    @property
    def lr(self) -> float:
        return self.state.lr

    def set_epoch(self, epoch: int) -> None:
        self.state.current_epoch = epoch

    def step(self) -> None:
        sgd_step(self.params, self.state, self.momentum, self._buffers)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
