"""Central-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .core import Tensor, backward, no_grad


def finite_difference_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    epsilon: float = 1e-5,
    params: Sequence[Tensor] = (),
) -> float:
    """Max over coordinates of ``|analytic - central| / max(1, |analytic|)``.

    ``fn(*inputs)`` must return a scalar tensor.  Gradients are checked for
    every tensor in ``inputs`` and ``params`` that requires gradients; params
    are tensors the graph closes over (layer weights, say).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    targets = [t for t in list(inputs) + list(params) if t.requires_grad]
    for t in targets:
        t.grad = None
    out = fn(*inputs)
    if out.data.size != 1:
        raise ValueError(f"graph output must be scalar, got shape {out.shape}")
    backward(out, params=targets)
    analytic = [t.grad.copy() for t in targets]

    worst = 0.0
    with no_grad():
        for t, g in zip(targets, analytic):
            flat = t.data.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + epsilon
                up = float(fn(*inputs).data)
                flat[i] = orig - epsilon
                down = float(fn(*inputs).data)
                flat[i] = orig
                numeric = (up - down) / (2 * epsilon)
                err = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]))
                worst = max(worst, err)
    for t in targets:
        t.grad = None
    return worst
