"""Central-difference verification of analytic gradients."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .params import ParamStore
from .tensor import Tensor


class NumericError(RuntimeError):
    """Non-finite value encountered where a finite one is required."""


def _scalar(loss: Tensor) -> float:
    value = float(np.asarray(loss.data).reshape(()))
    if not math.isfinite(value):
        raise NumericError(f"loss is not finite: {value}")
    return value


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: ParamStore,
    h: float = 1e-5,
    max_coords: int = 20,
    seed: int = 0,
    names=None,
) -> float:
    """Max relative error between backprop and central differences.

    Up to ``max_coords`` coordinates per parameter are sampled.  The relative
    error of one coordinate is |a - n| / max(|a|, |n|, 1e-8).
    """
    names = list(params) if names is None else list(names)
    rng = np.random.default_rng(seed)
    params.zero_grad()
    loss = loss_fn()
    _scalar(loss)
    loss.backward()
    analytic = {n: (params[n].grad.copy() if params[n].grad is not None else np.zeros_like(params[n].data)) for n in names}
    params.zero_grad()

    worst = 0.0
    for n in names:
        p = params[n]
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            plus = _scalar(loss_fn())
            flat[i] = orig - h
            minus = _scalar(loss_fn())
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * h)
            a = analytic[n].reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def check_function(fn: Callable[..., Tensor], inputs: list[np.ndarray], h: float = 1e-5, seed: int = 0) -> float:
    """Gradient-check ``sum(w * fn(*inputs))`` for a fixed random ``w``.

    The random projection makes every output coordinate matter, which a
    plain sum would not (softmax outputs sum to a constant, for instance).
    """
    store = ParamStore(seed, dtype=np.float64)
    for k, x in enumerate(inputs):
        store.add(f"x{k}", np.asarray(x, dtype=np.float64))
    probe = fn(*[store[f"x{k}"] for k in range(len(inputs))])
    w = np.random.default_rng(seed + 1).normal(size=probe.shape)

    def loss():
        out = fn(*[store[f"x{k}"] for k in range(len(inputs))])
        return (out * w).sum()

    return grad_check(loss, store, h=h, max_coords=10_000, seed=seed)
