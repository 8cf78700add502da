"""Gaussian-process surrogate search over the loss-genome space.

The discrete genome space is small enough to enumerate outright, so the
acquisition (expected improvement) is maximized by scoring every untried
candidate under the GP posterior. Early stopping of bad trials uses the
median rule over completed trials' running averages.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist
from scipy.stats import norm

from .losses import (
    CONSTRAINT_MODES, UNARY_OPS, WEIGHT_OPS, LossGenome, canonical_genome,
)
from .stencils import KERNEL_FAMILIES

__all__ = [
    "GpFitError", "GpSurrogate", "TrialRecord",
    "expected_improvement", "encode_genome", "enumerate_genomes",
    "bo_suggest", "median_stop_check",
    "ETA1_GRID", "RHO_GRID", "LAMBDA_B_GRID", "LAMBDA_G_GRID",
]

# numeric knobs are searched over these grids; the paper fixes none of
# them, so they stay small and log-spaced
ETA1_GRID = (0.5, 1.0, 2.0)
RHO_GRID = (0.01, 0.1)
LAMBDA_B_GRID = (1.0, 10.0)
LAMBDA_G_GRID = (0.01, 0.1)

_NUMERIC_BOUNDS = {
    "eta1": (0.5, 2.0),
    "rho": (0.01, 0.1),
    "lambda_b": (1.0, 10.0),
    "lambda_g": (0.01, 0.1),
}


class GpFitError(RuntimeError):
    pass


@dataclass
class TrialRecord:
    """One search trial: a genome and how its training went."""
    genome: LossGenome
    trace: list = field(default_factory=list)   # per-epoch validation metric
    final_error: float | None = None
    status: str = "running"

    def best_so_far(self, epoch=None):
        upto = self.trace if epoch is None else self.trace[:epoch + 1]
        return min(upto)

    def finish(self):
        self.status = "completed"
        self.final_error = min(self.trace)

    def stop(self):
        self.status = "stopped"


def _log01(value, lo, hi):
    x = (math.log(value) - math.log(lo)) / (math.log(hi) - math.log(lo))
    return min(max(x, 0.0), 1.0)


def _one_hot(value, options):
    v = np.zeros(len(options))
    v[options.index(value)] = 1.0
    return v


def encode_genome(g):
    """Map a genome to a fixed-length vector: one-hot categoricals,
    0/1 switches, log-normalized numerics. Inert knobs are canonicalized
    away so equivalent genomes share an encoding."""
    g = canonical_genome(g)
    parts = [
        _one_hot(g.constraint, list(CONSTRAINT_MODES)),
        _one_hot(g.kernel_family, list(KERNEL_FAMILIES)),
        _one_hot(g.unary, list(UNARY_OPS)),
        _one_hot(g.weight_op, list(WEIGHT_OPS)),
        [float(g.gradient_enhance), float(g.add_ones),
         float(g.boundary_loss)],
        [_log01(g.eta1, *_NUMERIC_BOUNDS["eta1"]),
         _log01(g.rho, *_NUMERIC_BOUNDS["rho"]),
         _log01(g.lambda_b, *_NUMERIC_BOUNDS["lambda_b"]),
         _log01(g.lambda_g, *_NUMERIC_BOUNDS["lambda_g"])],
    ]
    return np.concatenate(parts)


def enumerate_genomes(constraints=CONSTRAINT_MODES, families=KERNEL_FAMILIES,
                      unaries=UNARY_OPS, weight_ops=WEIGHT_OPS):
    """Every canonical genome in the (restricted) search space.

    Numeric grids only multiply in where the switch that uses them is on,
    so the enumeration is duplicate-free by construction.
    """
    out = []
    for con, fam, una, wop, enh, add, bnd in itertools.product(
            constraints, families, unaries, weight_ops,
            (False, True), (False, True), (False, True)):
        etas = ETA1_GRID if wop == "normalize" else (1.0,)
        rhos = RHO_GRID if wop == "pointwise_grad" else (0.1,)
        lgs = LAMBDA_G_GRID if enh else (0.01,)
        lbs = LAMBDA_B_GRID if bnd else (1.0,)
        for eta, rho, lg, lb in itertools.product(etas, rhos, lgs, lbs):
            out.append(LossGenome(
                constraint=con, kernel_family=fam, unary=una,
                gradient_enhance=enh, weight_op=wop, add_ones=add,
                boundary_loss=bnd, eta1=eta, rho=rho,
                lambda_g=lg, lambda_b=lb))
    return out


def _matern52(a, b, length_scale):
    r = cdist(a, b) / length_scale
    s = math.sqrt(5.0) * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


class GpSurrogate:
    """Matern-5/2 GP on standardized targets, length scale picked by
    marginal likelihood on a small grid."""

    def __init__(self, noise=1e-6, length_scales=(0.5, 1.0, 2.0, 4.0, 8.0)):
        self.noise = noise
        self.length_scales = length_scales
        self.X = None
        self.y = None
        self._fitted = False

    @property
    def n_observed(self):
        return 0 if self.X is None else self.X.shape[0]

    @property
    def best_y(self):
        return float(self.y.min())

    def add(self, x, y):
        x = np.asarray(x, dtype=float)[None]
        y = np.asarray([y], dtype=float)
        self.X = x if self.X is None else np.vstack([self.X, x])
        self.y = y if self.y is None else np.concatenate([self.y, y])
        self._fitted = False

    def fit(self):
        if self.n_observed < 2:
            raise GpFitError("need at least 2 observations")
        if not np.isfinite(self.X).all() or not np.isfinite(self.y).all():
            raise GpFitError("non-finite observations")
        self._y_mean = float(self.y.mean())
        self._y_std = float(self.y.std()) or 1.0
        ys = (self.y - self._y_mean) / self._y_std
        best = None
        for ls in self.length_scales:
            K = _matern52(self.X, self.X, ls)
            K[np.diag_indices_from(K)] += self.noise
            try:
                chol = cho_factor(K, lower=True)
            except np.linalg.LinAlgError as e:
                raise GpFitError(f"kernel factorization failed: {e}") from e
            alpha = cho_solve(chol, ys)
            logml = (-0.5 * float(ys @ alpha)
                     - float(np.log(np.diag(chol[0])).sum())
                     - 0.5 * len(ys) * math.log(2 * math.pi))
            if best is None or logml > best[0]:
                best = (logml, ls, chol, alpha)
        _, self.length_scale, self._chol, self._alpha = best
        self._fitted = True

    def predict(self, Xq):
        """Posterior mean and variance (original units) at query rows."""
        if not self._fitted:
            raise GpFitError("surrogate not fitted")
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        Ks = _matern52(Xq, self.X, self.length_scale)
        mean = Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        var = 1.0 + self.noise - np.einsum("ij,ji->i", Ks, v)
        var = np.maximum(var, 0.0)
        return mean * self._y_std + self._y_mean, var * self._y_std**2


def expected_improvement(mean, var, best):
    """EI for minimization; zero wherever the posterior is certain."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.asarray(var, dtype=float))
    ei = np.zeros_like(mean)
    live = sd > 0
    z = (best - mean[live]) / sd[live]
    ei[live] = (best - mean[live]) * norm.cdf(z) + sd[live] * norm.pdf(z)
    return np.maximum(ei, 0.0)


def bo_suggest(surrogate, candidates, encoded, tried, rng):
    """Pick the next genome: EI argmax over untried candidates, falling
    back to a uniform random pick if the surrogate cannot be fit.

    Returns (index into candidates, info dict with a `fallback` flag).
    """
    pool = [i for i in range(len(candidates)) if i not in tried]
    if not pool:
        raise ValueError("every candidate has been tried")
    try:
        surrogate.fit()
        mean, var = surrogate.predict(encoded[pool])
        ei = expected_improvement(mean, var, surrogate.best_y)
        j = int(np.argmax(ei))
        return pool[j], {"fallback": False, "ei": float(ei[j])}
    except GpFitError:
        return int(rng.choice(pool)), {"fallback": True, "ei": None}


def median_stop_check(trial, completed, epoch, total_epochs):
    """Stop a running trial early if, past a 10% grace period, its
    best-so-far metric is strictly worse than the median of completed
    trials' running averages at the same epoch."""
    if epoch < 0.1 * total_epochs:
        return False
    averages = [float(np.mean(t.trace[:epoch + 1]))
                for t in completed
                if t.status == "completed" and len(t.trace) > epoch]
    if not averages:
        return False
    return trial.best_so_far(epoch) > float(np.median(averages))
