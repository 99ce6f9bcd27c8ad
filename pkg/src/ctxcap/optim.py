"""Adam optimizer over a ParamStore."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamStore


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ParamStore, state: AdamState, names=None) -> None:
    """One bias-corrected Adam update of ``names`` (default: all), then zero
    every gradient in the store.

    Raises KeyError naming the first selected parameter without a gradient.
    """
    names = list(params) if names is None else sorted(names)
    for n in names:
        if params[n].grad is None:
            raise KeyError(f"parameter {n!r} has no gradient")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for n in names:
        p = params[n]
        g = p.grad
        m = state.m.get(n)
        if m is None:
            m = state.m[n] = np.zeros_like(p.data)
            state.v[n] = np.zeros_like(p.data)
        v = state.v[n]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / corr1
        v_hat = v / corr2
        p.data -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype)
    params.zero_grad()


def clip_grad_norm(params: ParamStore, names, max_norm: float) -> float:
    """Rescale the gradients of ``names`` so their joint L2 norm is at most
    ``max_norm``.  Returns the norm before clipping."""
    grads = [params[n].grad for n in names if params[n].grad is not None]
    total = float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            g *= scale
    return total
