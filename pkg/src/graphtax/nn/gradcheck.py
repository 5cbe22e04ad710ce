"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Iterable, Optional

import numpy as np

from .optim import ParamStore
from .tensor import Tensor


def grad_check(
    fn: Callable[[], Tensor],
    params: ParamStore | Iterable[tuple[str, Tensor]],
    tol: Optional[float] = None,
    h: float = 1e-5,
    max_per_param: Optional[int] = 25,
    floor: float = 1e-6,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central differences.

    ``fn`` must rebuild the graph from the current parameter values on every
    call.  At most ``max_per_param`` coordinates are sampled per parameter.
    The per-coordinate error is ``max(|a - n| - r, 0) / max(|a|, |n|, floor)``
    where ``r = 16 eps (|f(x+h)| + |f(x-h)|) / (2h)`` bounds the round-off of
    the central difference itself.  Without it, a gradient that is exactly
    zero (a dead ReLU unit, say) shows a spurious error of order 1e-10 / floor.
    If ``tol`` is given, exceeding it raises ``AssertionError``.
    """
    items = list(params)
    for _, p in items:
        p.grad = None
    loss = fn()
    loss.backward()
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for name, p in items}
    for _, p in items:
        p.grad = None

    rng = np.random.default_rng(seed)
    worst, where = 0.0, None
    for name, p in items:
        size = p.data.size
        coords = np.arange(size)
        if max_per_param is not None and size > max_per_param:
            coords = rng.choice(size, max_per_param, replace=False)
        for c in coords:
            idx = np.unravel_index(c, p.data.shape)
            orig = p.data[idx]
            p.data[idx] = orig + h
            fp = fn().item()
            p.data[idx] = orig - h
            fm = fn().item()
            p.data[idx] = orig
            num = (fp - fm) / (2 * h)
            roundoff = 16 * np.finfo(p.data.dtype).eps * (abs(fp) + abs(fm)) / (2 * h)
            a = analytic[name][idx]
            err = max(abs(a - num) - roundoff, 0.0) / max(abs(a), abs(num), floor)
            if err > worst:
                worst, where = err, (name, idx, a, num)
    if tol is not None and worst >= tol:
        raise AssertionError(f"gradient check failed: rel err {worst:.3e} at {where}")
    return worst
