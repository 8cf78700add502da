"""Adam optimizer operating on lists of parameter tensors."""

from __future__ import annotations

import numpy as np

__all__ = ["AdamState", "adam_step", "sgd_step", "clear_grads"]


class AdamState:
    """First/second moment buffers plus the shared step counter.

    One state object per parameter list; buffers are keyed positionally,
    so the list must be passed in a stable order.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params, state, active=None):
    """One bias-corrected Adam update in place; params with no grad are skipped.

    ``active`` optionally restricts the update to a subset (boolean list
    aligned with ``params``); inactive slots keep data *and* moments
    untouched, which is what weight-sharing searches rely on.
    """
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for i, p in enumerate(params):
        if active is not None and not active[i]:
            continue
        if p.grad is None:
            continue
        g = p.grad
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / bias1
        v_hat = state.v[i] / bias2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def sgd_step(params, lr):
    for p in params:
        if p.grad is not None:
            p.data -= lr * p.grad


def clear_grads(params):
    for p in params:
        p.grad = None
