"""PDE residuals assembled from stencil derivatives.

Each residual function returns a ``ResidualField``: the residual values on
the full grid (zeros where no valid value exists) plus a 0/1 mask of the
cells that actually carry a residual. Two masking regimes:

  * soft (default): derivatives use only grid values, so the mask excludes
    the stencil-reach rings along non-periodic axes.
  * ghost (``ghost=True``, needs a BoundarySpec): the field is extended
    with ghost rings derived from the boundary conditions, residuals reach
    every interior cell, and only the width-1 physical boundary ring is
    excluded. Border cells are assumed to hold their prescribed values
    (apply the hard constraint first).

Periodic axes are structural in both regimes: fields are wrap-padded
before differencing and no cells are masked along them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter

from .constraints import ghost_pad
from .stencils import (
    derivative_kernel, first_derivative, second_derivative,
    stencil_reach, valid_mask, wrap_pad,
)
from .tensor import Tensor, pad2d, slice_axis

__all__ = [
    "ResidualField", "masked_mean",
    "laplacian_residual", "polar_laplacian_residual", "darcy_residual",
    "residual_gradient",
]


@dataclass
class ResidualField:
    field: Tensor            # [N,1,H,W], zeros off-mask
    mask: np.ndarray         # [H,W], 1.0 where the residual is valid
    periodic_axes: tuple = ()


def masked_mean(t, mask):
    """Mean of an [N,C,H,W] tensor over the cells where mask == 1."""
    n_cells = float(mask.sum())
    if n_cells == 0:
        raise ValueError("mask selects no cells")
    N, C, H, W = t.shape
    m = Tensor(np.broadcast_to(mask, (N, C, H, W)).copy())
    return (t * m).sum() * (1.0 / (n_cells * N * C))


def _per_pass_margins(family, axis, h):
    k = derivative_kernel(family, 1, axis, h)
    return (k.shape[0] - 1) // 2, (k.shape[1] - 1) // 2


def _term_margins(family, order, axis):
    """Total (rows, cols) margin consumed by one derivative term."""
    mh, mw = _per_pass_margins(family, axis, 1.0)
    if order == 2 and family.startswith("sobel"):
        return 2 * mh, 2 * mw
    if order == 2:   # central families: same support as order 1
        return mh, mw
    return mh, mw


def _fit(t, pad_h, pad_w):
    """Crop leftover padding (positive) or zero-embed a deficit (negative)."""
    if pad_h > 0 or pad_w > 0:
        H, W = t.shape[2], t.shape[3]
        ch = pad_h if pad_h > 0 else 0
        cw = pad_w if pad_w > 0 else 0
        if ch:
            t = slice_axis(t, 2, ch, H - ch)
        if cw:
            t = slice_axis(t, 3, cw, t.shape[3] - cw)
        pad_h, pad_w = min(pad_h, 0), min(pad_w, 0)
    eh, ew = -pad_h, -pad_w
    if eh > 0 or ew > 0:
        t = pad2d(t, (eh, eh, ew, ew))
    return t


def _derivative_term(u, axis, order, h_ax, family, periodic_axes, prepad=0):
    """One full-grid derivative term of a (possibly ghost-padded) field.

    ``prepad`` is the uniform ghost width already present on ``u``; with
    prepad=0, periodic axes are wrap-padded here and non-periodic margins
    come back as embedded zeros.
    """
    mh, mw = _term_margins(family, order, axis)
    pad_h = pad_w = prepad
    if prepad == 0:
        if 0 in periodic_axes and mh > 0:
            u = wrap_pad(u, 0, mh)
            pad_h = mh
        if 1 in periodic_axes and mw > 0:
            u = wrap_pad(u, 1, mw)
            pad_w = mw
    fn = first_derivative if order == 1 else second_derivative
    out = fn(u, axis, h_ax, family, embed=False)
    return _fit(out, pad_h - mh, pad_w - mw)


def _const_like(arr, N, C, H, W):
    return Tensor(np.broadcast_to(arr, (N, C, H, W)).copy())


def _resolve_masks(H, W, reach, periodic_axes, ghost):
    if ghost:
        return valid_mask(H, W, 1, periodic_axes)
    return valid_mask(H, W, reach, periodic_axes)


def laplacian_residual(u, h, family, source=None, bc=None, ghost=False):
    """u_yy + u_xx - source on a cartesian grid; h = (hy, hx)."""
    N, C, H, W = u.shape
    hy, hx = h
    periodic = bc.periodic_axes if bc is not None else ()
    reach = stencil_reach(family, 2)
    prepad = 0
    if ghost:
        if bc is None:
            raise ValueError("ghost residuals need a BoundarySpec")
        u = ghost_pad(u, bc, reach, h)
        prepad = reach
    lap = (_derivative_term(u, 0, 2, hy, family, periodic, prepad)
           + _derivative_term(u, 1, 2, hx, family, periodic, prepad))
    if source is not None:
        lap = lap - _const_like(np.asarray(source, dtype=np.float64), N, C, H, W)
    return ResidualField(lap, _resolve_masks(H, W, reach, periodic, ghost), periodic)


def polar_laplacian_residual(u, rho, h, family, bc=None, ghost=False):
    """u_rr + u_r / rho + u_tt / rho^2 on an annulus grid.

    Rows (axis 0) run over radius with spacing h[0]; columns (axis 1) over
    the angle with spacing h[1] and are periodic. ``rho`` is the 1-D array
    of radii per row, all positive.
    """
    N, C, H, W = u.shape
    h_rho, h_theta = h
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (H,):
        raise ValueError(f"rho must have shape ({H},), got {rho.shape}")
    if np.any(rho <= 0.0):
        raise ValueError("annulus radii must be positive")
    periodic = bc.periodic_axes if bc is not None else (1,)
    if 1 not in periodic:
        raise ValueError("the angular axis of an annulus must be periodic")
    reach = stencil_reach(family, 2)
    prepad = 0
    if ghost:
        if bc is None:
            raise ValueError("ghost residuals need a BoundarySpec")
        u = ghost_pad(u, bc, reach, h)
        prepad = reach
    u_rr = _derivative_term(u, 0, 2, h_rho, family, periodic, prepad)
    u_r = _derivative_term(u, 0, 1, h_rho, family, periodic, prepad)
    u_tt = _derivative_term(u, 1, 2, h_theta, family, periodic, prepad)
    inv_rho = _const_like((1.0 / rho)[:, None], N, C, H, W)
    inv_rho2 = _const_like((1.0 / rho ** 2)[:, None], N, C, H, W)
    res = u_rr + u_r * inv_rho + u_tt * inv_rho2
    return ResidualField(res, _resolve_masks(H, W, reach, periodic, ghost), periodic)


def darcy_residual(u, K, h, family, bc=None, ghost=False):
    """-div(K grad u): two composed first-derivative passes per axis.

    ``K`` is the permeability on the grid ([H,W] or [N,1,H,W] numpy); in
    ghost mode it is extended outward by edge replication.
    """
    N, C, H, W = u.shape
    hy, hx = h
    K = np.asarray(K, dtype=np.float64)
    if K.ndim == 2:
        K = np.broadcast_to(K, (N, C, H, W))
    if K.shape != (N, C, H, W):
        raise ValueError(f"K has shape {K.shape}, expected {(N, C, H, W)} or {(H, W)}")
    periodic = bc.periodic_axes if bc is not None else ()
    r1 = stencil_reach(family, 1)
    reach = 2 * r1
    prepad = 0
    if ghost:
        if bc is None:
            raise ValueError("ghost residuals need a BoundarySpec")
        u = ghost_pad(u, bc, reach, h)
        K = np.pad(K, ((0, 0), (0, 0), (reach, reach), (reach, reach)), mode="edge")
        prepad = reach

    def flux_div(axis, h_ax):
        mh, mw = _per_pass_margins(family, axis, 1.0)
        if prepad == 0:
            v, pad_h, pad_w = u, 0, 0
            Kf = K
            if 0 in periodic and mh > 0:
                v = wrap_pad(v, 0, mh)
                Kf = np.concatenate([Kf[:, :, -mh:], Kf, Kf[:, :, :mh]], axis=2)
                pad_h = mh
            if 1 in periodic and mw > 0:
                v = wrap_pad(v, 1, mw)
                Kf = np.concatenate([Kf[..., -mw:], Kf, Kf[..., :mw]], axis=3)
                pad_w = mw
        else:
            v, pad_h, pad_w = u, prepad, prepad
            Kf = K
        p = first_derivative(v, axis, h_ax, family, embed=False)
        pad_h, pad_w = pad_h - mh, pad_w - mw
        # K at the grid positions that survived the first pass (center crop)
        oh = (Kf.shape[2] - p.shape[2]) // 2
        ow = (Kf.shape[3] - p.shape[3]) // 2
        Kc = Kf[:, :, oh:oh + p.shape[2], ow:ow + p.shape[3]]
        q = p * Tensor(np.ascontiguousarray(Kc))
        d = first_derivative(q, axis, h_ax, family, embed=False)
        return _fit(d, pad_h - mh, pad_w - mw)

    res = -(flux_div(0, hy) + flux_div(1, hx))
    return ResidualField(res, _resolve_masks(H, W, reach, periodic, ghost), periodic)


def residual_gradient(res, h, family):
    """Spatial first derivatives of a residual field, one term per axis.

    Each returned ResidualField has its mask eroded by the derivative's
    stencil support, so the gradient is only trusted where every tap lay
    on a valid residual cell. Periodic axes wrap.
    """
    hy, hx = h
    out = []
    for axis, h_ax in ((0, hy), (1, hx)):
        mh, mw = _per_pass_margins(family, axis, 1.0)
        t = res.field
        pad_h = pad_w = 0
        if 0 in res.periodic_axes and mh > 0:
            t = wrap_pad(t, 0, mh)
            pad_h = mh
        if 1 in res.periodic_axes and mw > 0:
            t = wrap_pad(t, 1, mw)
            pad_w = mw
        d = first_derivative(t, axis, h_ax, family, embed=False)
        d = _fit(d, pad_h - mh, pad_w - mw)
        modes = ("wrap" if 0 in res.periodic_axes else "constant",
                 "wrap" if 1 in res.periodic_axes else "constant")
        eroded = minimum_filter(res.mask, size=(2 * mh + 1, 2 * mw + 1),
                                mode=modes, cval=0.0)
        out.append(ResidualField(d, eroded, res.periodic_axes))
    return out
