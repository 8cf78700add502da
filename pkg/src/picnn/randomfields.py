"""Gaussian random fields on grids via truncated Karhunen-Loeve expansions.

The covariance is the squared-exponential kernel

    C(x, x') = sigma0^2 * exp(-|x - x'|^2 / l^2)

discretized on the grid points. ``kl_expansion`` eigendecomposes the
dense covariance matrix (scipy.linalg.eigh, largest modes only) and a
sample is sum_k sqrt(lambda_k) xi_k phi_k with iid standard-normal xi.
Eigenfields are orthonormal under the discrete dot product. Tiny negative
eigenvalues from round-off are clamped to zero; genuinely negative ones
raise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

__all__ = ["GrfSpec", "KLBasis", "grid_points", "gaussian_covariance",
           "kl_expansion", "sample_grf", "theoretical_variance"]


@dataclass(frozen=True)
class GrfSpec:
    sigma0: float
    length_scale: float
    n_modes: int

    def __post_init__(self):
        if self.sigma0 <= 0 or self.length_scale <= 0:
            raise ValueError("sigma0 and length_scale must be positive")
        if self.n_modes < 1:
            raise ValueError("need at least one mode")


@dataclass(frozen=True)
class KLBasis:
    eigenvalues: np.ndarray   # [m], descending, >= 0
    fields: np.ndarray        # [m, H, W], orthonormal as flattened vectors
    grid_shape: tuple


def grid_points(ny, nx, extent=(1.0, 1.0)):
    """[ny*nx, 2] coordinates of a regular grid over [0,Ly] x [0,Lx]."""
    Ly, Lx = extent
    y = np.linspace(0.0, Ly, ny)
    x = np.linspace(0.0, Lx, nx)
    Y, X = np.meshgrid(y, x, indexing="ij")
    return np.column_stack([Y.ravel(), X.ravel()])


def gaussian_covariance(points, sigma0, length_scale):
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    return sigma0**2 * np.exp(-d2 / length_scale**2)


def kl_expansion(ny, nx, spec, extent=(1.0, 1.0)):
    """Leading KL modes of the squared-exponential field on an ny x nx grid."""
    pts = grid_points(ny, nx, extent)
    n = pts.shape[0]
    m = spec.n_modes
    if m > n:
        raise ValueError(f"{m} modes requested but the grid has {n} points")
    C = gaussian_covariance(pts, spec.sigma0, spec.length_scale)
    vals, vecs = eigh(C, subset_by_index=[n - m, n - 1])
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    floor = -1e-10 * max(vals[0], 1.0)
    if np.any(vals < floor):
        raise ValueError(f"covariance matrix is indefinite (min eigenvalue {vals.min():.3e})")
    vals = np.maximum(vals, 0.0)
    fields = vecs.T.reshape(m, ny, nx)
    return KLBasis(vals, fields, (ny, nx))


def sample_grf(basis, rng, n_samples=1):
    """[n_samples, H, W] draws from the truncated expansion."""
    m = basis.eigenvalues.size
    xi = rng.standard_normal((n_samples, m))
    scaled = xi * np.sqrt(basis.eigenvalues)[None, :]
    return np.einsum("sm,mhw->shw", scaled, basis.fields)


def theoretical_variance(basis):
    """Pointwise variance of the truncated expansion: sum_k lambda_k phi_k^2."""
    return np.einsum("m,mhw->hw", basis.eigenvalues, basis.fields**2)
