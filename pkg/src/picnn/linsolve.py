"""Reference solutions for the grid PDEs: sparse assembly + preconditioned CG.

These solvers produce the "truth" fields the networks are evaluated
against, so they are deliberately boring: 5-point finite differences /
finite volumes assembled into scipy.sparse matrices, solved by a
hand-rolled Jacobi-preconditioned conjugate-gradient loop with a tight
tolerance. Small systems in tests are cross-checked against dense solves.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

__all__ = [
    "pcg", "SolverError",
    "solve_poisson_dirichlet", "solve_darcy_flow", "darcy_boundary_flux",
]


class SolverError(RuntimeError):
    """Iterative solve failed to reach tolerance."""


def pcg(A, b, tol=1e-10, maxiter=None):
    """Jacobi-preconditioned conjugate gradients for SPD sparse systems.

    Terminates when ||r|| / ||b|| <= tol; raises SolverError if the
    iteration cap (default 50 * n) is hit first. Returns (x, info) with
    the iteration count and final relative residual.
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    if maxiter is None:
        maxiter = 50 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), {"iterations": 0, "rel_residual": 0.0}

    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("matrix diagonal must be positive for Jacobi preconditioning")
    inv_diag = 1.0 / diag

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return x, {"iterations": it, "rel_residual": float(rel)}
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"pcg: no convergence in {maxiter} iterations "
                      f"(rel residual {np.linalg.norm(r) / bnorm:.3e})")


def _border_array(g, H, W):
    arr = np.asarray(g, dtype=np.float64)
    if arr.ndim == 0:
        full = np.full((H, W), float(arr))
    elif arr.shape == (H, W):
        full = arr
    else:
        raise ValueError(f"boundary values must be scalar or ({H},{W}), got {arr.shape}")
    return full


def solve_poisson_dirichlet(f, g, h, tol=1e-10, maxiter=None):
    """Solve lap(u) = f on a grid with Dirichlet borders from ``g``.

    ``f`` is the [H,W] source, ``g`` a scalar or [H,W] array whose border
    entries prescribe u, ``h`` = (hy, hx). Returns the full [H,W] field.
    """
    f = np.asarray(f, dtype=np.float64)
    H, W = f.shape
    if H < 3 or W < 3:
        raise ValueError(f"grid {H}x{W} has no interior")
    gfull = _border_array(g, H, W)
    hy, hx = h
    cy, cx = 1.0 / hy**2, 1.0 / hx**2
    Hi, Wi = H - 2, W - 2
    n = Hi * Wi

    def idx(i, j):
        return (i - 1) * Wi + (j - 1)

    ii, jj = np.meshgrid(np.arange(1, H - 1), np.arange(1, W - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    rows, cols, vals = [], [], []
    center = idx(ii, jj)
    rows.append(center); cols.append(center)
    vals.append(np.full(n, 2.0 * cy + 2.0 * cx))
    b = -f[1:-1, 1:-1].ravel().copy()

    for di, dj, c in ((-1, 0, cy), (1, 0, cy), (0, -1, cx), (0, 1, cx)):
        ni, nj = ii + di, jj + dj
        interior = (ni >= 1) & (ni <= H - 2) & (nj >= 1) & (nj <= W - 2)
        rows.append(center[interior]); cols.append(idx(ni[interior], nj[interior]))
        vals.append(np.full(interior.sum(), -c))
        border = ~interior
        np.add.at(b, center[border], c * gfull[ni[border], nj[border]])

    A = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    x, _ = pcg(A, b, tol=tol, maxiter=maxiter)
    u = gfull.copy()
    u[1:-1, 1:-1] = x.reshape(Hi, Wi)
    return u


def _face_transmissibility(Ka, Kb):
    """Harmonic mean: zero when either side is impermeable."""
    s = Ka + Kb
    out = np.zeros_like(s)
    nz = s > 0
    out[nz] = 2.0 * Ka[nz] * Kb[nz] / s[nz]
    return out


def solve_darcy_flow(K, u_left=1.0, u_right=0.0, h=(1.0, 1.0),
                     tol=1e-10, maxiter=None):
    """-div(K grad u) = 0: Dirichlet left/right columns, sealed rows.

    Finite volumes with harmonic-mean face permeabilities. ``K`` is
    [H,W] positive; returns the full [H,W] head field with the left and
    right columns pinned to the prescribed values.
    """
    K = np.asarray(K, dtype=np.float64)
    H, W = K.shape
    if W < 3:
        raise ValueError("need at least one unknown column")
    if np.any(K <= 0.0):
        raise ValueError("permeability must be positive")
    hy, hx = h
    # transmissibilities between horizontally / vertically adjacent cells
    Tx = _face_transmissibility(K[:, :-1], K[:, 1:]) * (hy / hx)   # [H, W-1]
    Ty = _face_transmissibility(K[:-1, :], K[1:, :]) * (hx / hy)   # [H-1, W]

    Wi = W - 2
    n = H * Wi

    def idx(i, j):
        return i * Wi + (j - 1)

    ii, jj = np.meshgrid(np.arange(H), np.arange(1, W - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    center = idx(ii, jj)
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    b = np.zeros(n)

    # horizontal faces (always present; left/right neighbors may be Dirichlet)
    for dj in (-1, 1):
        nj = jj + dj
        T = Tx[ii, np.minimum(jj, nj)]
        diag[center] += T
        interior = (nj >= 1) & (nj <= W - 2)
        rows.append(center[interior]); cols.append(idx(ii[interior], nj[interior]))
        vals.append(-T[interior])
        border = ~interior
        gvals = np.where(nj[border] == 0, u_left, u_right)
        np.add.at(b, center[border], T[border] * gvals)

    # vertical faces (absent across the sealed top/bottom boundaries)
    for di in (-1, 1):
        ni = ii + di
        present = (ni >= 0) & (ni <= H - 1)
        T = np.zeros(n)
        T[present] = Ty[np.minimum(ii[present], ni[present]), jj[present]]
        diag[center] += T
        rows.append(center[present]); cols.append(idx(ni[present], jj[present]))
        vals.append(-T[present])

    rows.append(center); cols.append(center); vals.append(diag)
    A = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    x, _ = pcg(A, b, tol=tol, maxiter=maxiter)
    u = np.empty((H, W))
    u[:, 0] = u_left
    u[:, -1] = u_right
    u[:, 1:-1] = x.reshape(H, Wi)
    return u


def darcy_boundary_flux(u, K, h=(1.0, 1.0)):
    """(inflow across the left face, outflow across the right face).

    Uses the same harmonic-mean transmissibilities as the solver, so a
    converged solution balances the two to solver tolerance.
    """
    u = np.asarray(u, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    hy, hx = h
    Tx = _face_transmissibility(K[:, :-1], K[:, 1:]) * (hy / hx)
    inflow = float(np.sum(Tx[:, 0] * (u[:, 0] - u[:, 1])))
    outflow = float(np.sum(Tx[:, -1] * (u[:, -2] - u[:, -1])))
    return inflow, outflow
