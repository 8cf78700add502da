"""Finite-difference derivative stencils applied through the conv engine.

Four kernel families, all centered:

  central2  3-tap central differences, 2nd-order accurate
  central4  5-tap central differences, 4th-order accurate
  sobel3    3x3 Sobel (smoothing in the perpendicular direction), 2nd order
  sobel5    5x5 Sobel, 2nd order

First and second derivatives divide by h and h^2 respectively. The Sobel
families have no native second-derivative kernel; theirs is two composed
first-derivative passes. Derivatives are computed with *valid* correlation
and re-embedded into the full grid as zeros; ``stencil_reach`` reports how
many boundary rings carry no valid value so callers can mask them out.

Axis convention on [N, C, H, W] fields: axis 0 is the first spatial axis
(rows / y), axis 1 the second (columns / x).
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, concat, depthwise_conv2d, pad2d, slice_axis

__all__ = [
    "KERNEL_FAMILIES",
    "stencil_reach",
    "derivative_kernel",
    "first_derivative",
    "second_derivative",
    "valid_mask",
    "wrap_pad",
]

KERNEL_FAMILIES = ("central2", "central4", "sobel3", "sobel5")

_SMOOTH = {
    "sobel3": np.array([1.0, 2.0, 1.0]) / 4.0,
    "sobel5": np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0,
}
_SOBEL_DERIV = {
    "sobel3": np.array([-1.0, 0.0, 1.0]) / 2.0,
    "sobel5": np.array([-1.0, -2.0, 0.0, 2.0, 1.0]) / 8.0,
}
_CENTRAL = {
    ("central2", 1): np.array([-0.5, 0.0, 0.5]),
    ("central2", 2): np.array([1.0, -2.0, 1.0]),
    ("central4", 1): np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0,
    ("central4", 2): np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0,
}


def _check_family(family):
    if family not in KERNEL_FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}; expected one of {KERNEL_FAMILIES}")


def stencil_reach(family, order):
    """Boundary rings without a valid value for this family/derivative order."""
    _check_family(family)
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    if family == "central2":
        return 1
    if family == "central4":
        return 2
    base = 1 if family == "sobel3" else 2
    return base * order   # second derivatives are two composed passes


def derivative_kernel(family, order, axis, h):
    """The 2-D correlation kernel, or None when the family composes passes."""
    _check_family(family)
    if axis not in (0, 1):
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    if family in ("central2", "central4"):
        row = _CENTRAL[(family, order)] / (h ** order)
        return row.reshape(1, -1) if axis == 1 else row.reshape(-1, 1)
    if order == 2:
        return None   # composed from two first-derivative passes
    k = np.outer(_SMOOTH[family], _SOBEL_DERIV[family]) / h
    return k if axis == 1 else k.T


def _apply_kernel(u, kernel):
    """Valid per-channel correlation with a fixed (no-grad) kernel."""
    C = u.shape[1]
    w = Tensor(np.broadcast_to(kernel, (C, 1) + kernel.shape).copy())
    return depthwise_conv2d(u, w, stride=1, padding=0)


def _embed(t, rh, rw):
    if rh == 0 and rw == 0:
        return t
    return pad2d(t, (rh, rh, rw, rw))


def _kernel_margins(kernel):
    kh, kw = kernel.shape
    return (kh - 1) // 2, (kw - 1) // 2


def first_derivative(u, axis, h, family, embed=True):
    """d/d(axis) of an [N,C,H,W] field; zeros outside the valid interior."""
    kernel = derivative_kernel(family, 1, axis, h)
    out = _apply_kernel(u, kernel)
    if embed:
        rh, rw = _kernel_margins(kernel)
        out = _embed(out, rh, rw)
    return out


def second_derivative(u, axis, h, family, embed=True):
    """d2/d(axis)2; Sobel families compose two first-derivative passes."""
    _check_family(family)
    if family in ("central2", "central4"):
        kernel = derivative_kernel(family, 2, axis, h)
        out = _apply_kernel(u, kernel)
        rh, rw = _kernel_margins(kernel)
    else:
        kernel = derivative_kernel(family, 1, axis, h)
        out = _apply_kernel(_apply_kernel(u, kernel), kernel)
        mh, mw = _kernel_margins(kernel)
        rh, rw = 2 * mh, 2 * mw
    if embed:
        out = _embed(out, rh, rw)
    return out


def wrap_pad(u, axis, width):
    """Periodic padding along one spatial axis of an [N,C,H,W] tensor (on tape)."""
    if width == 0:
        return u
    ax = 2 + axis
    n = u.shape[ax]
    if width > n:
        raise ValueError(f"wrap width {width} exceeds extent {n}")
    head = slice_axis(u, ax, 0, width)
    tail = slice_axis(u, ax, n - width, n)
    return concat([tail, u, head], axis=ax)


def valid_mask(H, W, reach, periodic_axes=()):
    """float64 0/1 mask of cells whose full stencil support is in-bounds.

    Axes listed in ``periodic_axes`` are valid everywhere (the field is
    wrap-padded there before differencing).
    """
    mask = np.ones((H, W))
    if reach > 0:
        if 0 not in periodic_axes:
            mask[:reach, :] = 0.0
            mask[H - reach:, :] = 0.0
        if 1 not in periodic_axes:
            mask[:, :reach] = 0.0
            mask[:, W - reach:] = 0.0
    return mask
