"""Composable training losses built from a small genome of operators.

A genome fixes, in order: how boundary conditions enter (penalty term,
exact border overwrite, or both), which stencil family discretizes the
residual, a unary transform of the residue, an optional term built from
the residue's own spatial gradient, a residue-based point-weighting rule,
an optional all-ones addition to the weights, and the term weights.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .constraints import apply_hard_constraint, boundary_penalty
from .residuals import masked_mean, residual_gradient
from .stencils import KERNEL_FAMILIES
from .tensor import Tensor

__all__ = [
    "CONSTRAINT_MODES", "UNARY_OPS", "WEIGHT_OPS",
    "LossGenome", "WeightState", "LossEvaluator",
    "vanilla_genome", "canonical_genome",
    "weight_update_topn", "weight_update_normalize",
    "weight_update_pointwise_grad",
]

CONSTRAINT_MODES = ("soft", "hard", "combined")
UNARY_OPS = ("abs", "square", "identity")
WEIGHT_OPS = ("topn", "normalize", "pointwise_grad", "unitize")

# weight matrices are accumulated across calls for these ops, rebuilt
# from scratch for the others
_CUMULATIVE_OPS = ("topn", "pointwise_grad")


@dataclass(frozen=True)
class LossGenome:
    constraint: str = "soft"
    kernel_family: str = "central2"
    unary: str = "square"
    gradient_enhance: bool = False
    weight_op: str = "unitize"
    add_ones: bool = False
    boundary_loss: bool = True
    topn_frac: float = 0.01      # fraction of valid cells promoted per round
    eta1: float = 1.0            # normalize scale
    rho: float = 0.1             # pointwise-gradient ascent rate
    lambda_r: float = 1.0
    lambda_b: float = 1.0
    lambda_g: float = 0.01

    def __post_init__(self):
        if self.constraint not in CONSTRAINT_MODES:
            raise ValueError(f"unknown constraint mode {self.constraint!r}")
        if self.kernel_family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.kernel_family!r}")
        if self.unary not in UNARY_OPS:
            raise ValueError(f"unknown unary op {self.unary!r}")
        if self.weight_op not in WEIGHT_OPS:
            raise ValueError(f"unknown weight op {self.weight_op!r}")
        if not 0.0 < self.topn_frac <= 1.0:
            raise ValueError("topn_frac must be in (0, 1]")
        for name in ("eta1", "rho", "lambda_r", "lambda_b", "lambda_g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def vanilla_genome():
    """The genome whose loss is plain mean-squared residual + boundary MSE."""
    return LossGenome(constraint="soft", kernel_family="central2",
                      unary="square", gradient_enhance=False,
                      weight_op="unitize", add_ones=False, boundary_loss=True,
                      lambda_r=1.0, lambda_b=1.0)


def canonical_genome(g):
    """Reset numeric fields that the genome's switches make inert.

    Two genomes that differ only in an unused knob describe the same loss;
    canonicalizing collapses them to one point for search and deduplication.
    """
    kw = {}
    if g.weight_op != "topn":
        kw["topn_frac"] = 0.01
    if g.weight_op != "normalize":
        kw["eta1"] = 1.0
    if g.weight_op != "pointwise_grad":
        kw["rho"] = 0.1
    if not g.gradient_enhance:
        kw["lambda_g"] = 0.01
    if not g.boundary_loss:
        kw["lambda_b"] = 1.0
    return replace(g, **kw) if kw else g


@dataclass
class WeightState:
    """Per-point weight matrix carried across loss evaluations."""
    weights: np.ndarray | None = None
    mode: str = "direct"


def _leading(residue):
    # a bare matrix is one sample; batches carry samples on axis 0
    return 1 if residue.ndim <= 2 else residue.shape[0]


def _flat_samples(arr, n_samples):
    return arr.reshape(n_samples, -1)


def weight_update_topn(residue, state, n, mask=None):
    """Add 1 to the weights of the n largest-magnitude residue cells.

    Ranking is per sample; ties at the cutoff break by row-major index.
    Accumulates into `state` (zeros on first use).
    """
    residue = np.asarray(residue, dtype=float)
    ns = _leading(residue)
    mag = _flat_samples(np.abs(residue), ns).copy()
    if mask is not None:
        flat_mask = np.broadcast_to(mask == 0, residue.shape)
        mag[_flat_samples(flat_mask, ns)] = -np.inf
    valid = int((mag[0] > -np.inf).sum())
    if not 1 <= n <= valid:
        raise ValueError(f"n={n} out of range [1, {valid}]")
    if state.weights is None:
        state.weights = np.zeros_like(residue)
        state.mode = "cumulative"
    w = _flat_samples(state.weights, ns)
    # stable sort on the negated magnitudes keeps row-major order among ties
    order = np.argsort(-mag, axis=1, kind="stable")[:, :n]
    np.put_along_axis(w, order, np.take_along_axis(w, order, axis=1) + 1.0,
                      axis=1)
    return state


def weight_update_normalize(residue, eta1, mask=None):
    """Min-max normalize the residue into weights, scaled by eta1.

    Per-sample extrema; a constant residue yields all-zero weights.
    Direct mode — the result is the weight matrix, nothing accumulates.
    """
    residue = np.asarray(residue, dtype=float)
    ns = _leading(residue)
    flat = _flat_samples(residue, ns)
    if mask is not None:
        keep = _flat_samples(
            np.broadcast_to(mask != 0, residue.shape), ns)
        lo = np.where(keep, flat, np.inf).min(axis=1, keepdims=True)
        hi = np.where(keep, flat, -np.inf).max(axis=1, keepdims=True)
    else:
        keep = None
        lo = flat.min(axis=1, keepdims=True)
        hi = flat.max(axis=1, keepdims=True)
    span = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        w = eta1 * (flat - lo) / span
    w[np.broadcast_to(span == 0, w.shape)] = 0.0
    if keep is not None:
        w[~keep] = 0.0
    return w.reshape(residue.shape)


def weight_update_pointwise_grad(residue, state, rho):
    """Gradient-ascent step on per-point weights: w += rho * residue.

    The loss is linear in each weight, so dL/dw at a point is that point's
    (unary-transformed) residue. Weights start at 1 and accumulate.
    """
    residue = np.asarray(residue, dtype=float)
    if state.weights is None:
        state.weights = np.ones_like(residue)
        state.mode = "cumulative"
    state.weights = state.weights + rho * residue
    return state


def _unary_tensor(t, op):
    if op == "abs":
        return t.absolute()
    if op == "square":
        return t.square()
    return t


class LossEvaluator:
    """Loss callable assembled from a genome for one problem.

    Call with the raw network output, the split/index handle of the batch
    it was produced from, and a WeightState (one per persistent batch —
    cumulative weight ops accumulate into it across epochs).
    """

    def __init__(self, genome, problem):
        self.genome = genome
        self.problem = problem

    def new_state(self):
        mode = "cumulative" if self.genome.weight_op in _CUMULATIVE_OPS \
            else "direct"
        return WeightState(mode=mode)

    def _weights(self, residue, mask, state):
        g = self.genome
        if g.weight_op == "unitize":
            w = np.ones_like(residue)
        elif g.weight_op == "normalize":
            w = weight_update_normalize(residue, g.eta1, mask)
        elif g.weight_op == "topn":
            n = max(1, int(round(g.topn_frac * mask.sum())))
            weight_update_topn(residue, state, n, mask)
            w = state.weights
        else:
            weight_update_pointwise_grad(residue, state, g.rho)
            w = state.weights
        if state.mode == "direct":
            state.weights = w
        if g.add_ones:
            w = w + 1.0
        return w

    def __call__(self, u, split, indices, state):
        g = self.genome
        bc = self.problem.bc_for(split, indices)
        hard = g.constraint in ("hard", "combined")
        u_fit = apply_hard_constraint(u, bc, self.problem.h) if hard else u

        res = self.problem.residual(u_fit, split, indices, g.kernel_family,
                                    ghost=hard)
        r = _unary_tensor(res.field, g.unary)
        w = self._weights(r.data, res.mask, state)
        loss = masked_mean(Tensor(w) * r, res.mask) * g.lambda_r

        if g.gradient_enhance:
            for term in residual_gradient(res, self.problem.h,
                                          g.kernel_family):
                gterm = masked_mean(_unary_tensor(term.field, g.unary),
                                    term.mask)
                loss = loss + gterm * g.lambda_g

        if g.boundary_loss:
            # "hard" measures the (already exact) constrained field, so a
            # fully Dirichlet problem contributes exactly zero; "combined"
            # keeps the penalty alive by measuring the raw output
            u_pen = u_fit if g.constraint == "hard" else u
            pen = boundary_penalty(u_pen, bc, self.problem.h)
            if g.constraint == "hard" and all(
                    e.kind == "dirichlet" for e in
                    (bc.top, bc.bottom, bc.left, bc.right)):
                assert float(pen.data) == 0.0
            loss = loss + pen * g.lambda_b
        return loss
