"""Evaluation metrics."""

from __future__ import annotations

import numpy as np

__all__ = ["relative_l2", "mae"]


def relative_l2(pred, truth):
    """||pred - truth||_2 / ||truth||_2 over all points of the arrays."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth.ravel())
    if denom == 0.0:
        raise ValueError("truth field is identically zero")
    return float(np.linalg.norm((pred - truth).ravel()) / denom)


def mae(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(np.abs(pred - truth)))
