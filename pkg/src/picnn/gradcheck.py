"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["gradcheck", "max_rel_error"]


def max_rel_error(analytic, numeric):
    """max over entries of |a - n| / max(|a|, |n|, 1)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1.0)
    return float(np.max(np.abs(a - n) / denom))


def gradcheck(fn, inputs, h=1e-5):
    """Compare autodiff gradients of a scalar-valued ``fn`` to central differences.

    ``fn`` maps the tensors in ``inputs`` to a scalar Tensor. Returns the
    worst relative error over all entries of all inputs. Inputs must be
    float64 — float32 lacks the headroom for an h of 1e-5.
    """
    inputs = list(inputs)
    for x in inputs:
        if x.dtype != np.float64:
            raise ValueError("gradcheck requires float64 inputs")
        x.requires_grad = True
        x.grad = None

    out = fn(*inputs)
    out.backward()
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy()
                for x in inputs]

    worst = 0.0
    for k, x in enumerate(inputs):
        numeric = np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = fn(*inputs).item()
            flat[i] = orig - h
            fm = fn(*inputs).item()
            flat[i] = orig
            num_flat[i] = (fp - fm) / (2.0 * h)
        worst = max(worst, max_rel_error(analytic[k], numeric))
    return worst
