"""Dense-tensor engine with reverse-mode automatic differentiation.

Covers exactly the operations the convolutional networks, the stencil
machinery, and the search controllers need: elementwise algebra,
full reductions, 2-D matmul, convolutions, pooling, interpolation,
group normalization, and a handful of shape ops. Tensors are plain
numpy arrays plus an optional gradient buffer; each operation records
its inputs and a backward closure, and ``Tensor.backward`` walks the
resulting DAG once in reverse topological order.

Design constraints:
  * float64 is the default dtype; float32 is available as a storage
    mode for training, but every oracle test runs in float64.
  * no broadcasting beyond scalar-tensor: binary ops require equal
    shapes (fused ops may broadcast internally).
  * a graph is confined to one thread; there is no global tape.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "ShapeError",
    "concat",
    "slice_axis",
    "flip",
    "pad2d",
    "conv2d",
    "depthwise_conv2d",
    "depthwise_separable_conv2d",
    "maxpool2d",
    "avgpool2d",
    "upsample2d",
    "group_norm",
    "log_softmax",
]

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; names the offending dims."""


def _as_array(data, dtype):
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """N-dimensional array that can participate in the gradient tape.

    ``data`` is a contiguous numpy array, ``grad`` (same shape) is
    allocated lazily by ``backward``. Tensors produced by operations
    keep references to their parents plus a backward closure; leaves
    have neither.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward",
                 "_op", "backward_visits")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._op = "leaf"
        self.backward_visits = 0

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def zeros(shape, requires_grad=False, dtype=np.float64):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)

    @staticmethod
    def ones(shape, requires_grad=False, dtype=np.float64):
        return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)

    @staticmethod
    def full(shape, value, requires_grad=False, dtype=np.float64):
        return Tensor(np.full(shape, value, dtype=dtype), requires_grad=requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # -- autodiff core ---------------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into every requires_grad tensor.

        Repeated calls accumulate into ``.grad`` (clear with ``zero_grad``).
        Each node's backward closure runs exactly once per call.
        """
        if self.shape != ():
            raise ShapeError(f"backward root must be a scalar, got shape {self.shape}")

        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        pending = {id(self): np.ones((), dtype=self.dtype)}
        for node in reversed(topo):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            node.backward_visits += 1
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
            if node._backward is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                acc = pending.get(id(parent))
                pending[id(parent)] = pg if acc is None else acc + pg

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def square(self):
        return square(self)

    def abs(self):
        return absolute(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sigmoid(self):
        return sigmoid(self)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)

    def gelu(self):
        return gelu(self)

    def sum(self):
        return reduce_sum(self)

    def mean(self):
        return reduce_mean(self)

    def max(self):
        return max_reduce(self)

    def reshape(self, shape):
        return reshape(self, shape)


def _make(data, parents, backward, op):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._op = op
    else:
        out._op = op + "(const)"
    return out


def _coerce(other, like):
    """Lift scalars to 0-d tensors; reject shape mismatches."""
    if isinstance(other, Tensor):
        return other
    arr = np.asarray(other, dtype=like.dtype)
    if arr.ndim != 0:
        raise ShapeError("only scalar-tensor mixing is supported; wrap arrays in Tensor")
    return Tensor(arr)


def _check_same_shape(a, b, op):
    if a.shape != () and b.shape != () and a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes {a.shape} and {b.shape} differ "
                         "(no broadcasting beyond scalar-tensor)")


# -- elementwise algebra -------------------------------------------------------

def add(a, b):
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=b.dtype))
    b = _coerce(b, a)
    _check_same_shape(a, b, "add")

    def backward(g):
        ga = g.sum() if a.shape == () and g.shape != () else g
        gb = g.sum() if b.shape == () and g.shape != () else g
        return ga, gb

    return _make(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=b.dtype))
    b = _coerce(b, a)
    _check_same_shape(a, b, "sub")

    def backward(g):
        ga = g.sum() if a.shape == () and g.shape != () else g
        gb = -(g.sum() if b.shape == () and g.shape != () else g)
        return ga, gb

    return _make(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=b.dtype))
    b = _coerce(b, a)
    _check_same_shape(a, b, "mul")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g * bd
        gb = g * ad
        if a.shape == () and ga.shape != ():
            ga = ga.sum()
        if b.shape == () and gb.shape != ():
            gb = gb.sum()
        return ga, gb

    return _make(ad * bd, (a, b), backward, "mul")


def div(a, b):
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=b.dtype))
    b = _coerce(b, a)
    _check_same_shape(a, b, "div")
    if np.any(b.data == 0.0):
        raise ZeroDivisionError("div: denominator contains zero")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g / bd
        gb = -g * ad / (bd * bd)
        if a.shape == () and ga.shape != ():
            ga = ga.sum()
        if b.shape == () and gb.shape != ():
            gb = gb.sum()
        return ga, gb

    return _make(ad / bd, (a, b), backward, "div")


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def square(a):
    ad = a.data
    return _make(ad * ad, (a,), lambda g: (2.0 * ad * g,), "square")


def absolute(a):
    # subgradient 0 at 0 (np.sign(0) == 0)
    ad = a.data
    return _make(np.abs(ad), (a,), lambda g: (np.sign(ad) * g,), "abs")


def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,), "log")


def sigmoid(a):
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a):
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a):
    ad = a.data
    return _make(np.maximum(ad, 0.0), (a,), lambda g: (g * (ad > 0.0),), "relu")


def gelu(a):
    """x * Phi(x) with the exact Gaussian CDF (erf form, not tanh)."""
    ad = a.data
    cdf = 0.5 * (1.0 + erf(ad * _INV_SQRT2))

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * ad * ad)
        return (g * (cdf + ad * pdf),)

    return _make(ad * cdf, (a,), backward, "gelu")


# -- reductions ----------------------------------------------------------------

def reduce_sum(a):
    ad = a.data
    return _make(ad.sum(), (a,), lambda g: (np.full_like(ad, g),), "sum")


def reduce_mean(a):
    ad = a.data
    n = ad.size
    return _make(ad.mean(), (a,), lambda g: (np.full_like(ad, g / n),), "mean")


def max_reduce(a):
    """Maximum over all elements; subgradient routes to the first argmax."""
    ad = a.data
    flat_idx = int(np.argmax(ad))

    def backward(g):
        ga = np.zeros_like(ad)
        ga.flat[flat_idx] = g
        return (ga,)

    return _make(ad.max(), (a,), backward, "max_reduce")


# -- linear algebra & shape ops --------------------------------------------------

def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul supports 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        return g @ bd.T, ad.T @ g

    return _make(ad @ bd, (a, b), backward, "matmul")


def reshape(a, shape):
    old = a.shape

    def backward(g):
        return (g.reshape(old),)

    return _make(a.data.reshape(shape), (a,), backward, "reshape")


def concat(tensors, axis):
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        idx = [slice(None)] * g.ndim
        outs = []
        for k in range(len(sizes)):
            idx[axis] = slice(offsets[k], offsets[k + 1])
            outs.append(g[tuple(idx)])
        return tuple(outs)

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return _make(data, tuple(tensors), backward, "concat")


def slice_axis(a, axis, start, stop):
    """Contiguous slice along one axis; backward scatters into zeros."""
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    shape = a.shape

    def backward(g):
        ga = np.zeros(shape, dtype=g.dtype)
        ga[idx] = g
        return (ga,)

    return _make(a.data[idx].copy(), (a,), backward, "slice")


def flip(a, axis):
    def backward(g):
        return (np.flip(g, axis=axis),)

    return _make(np.flip(a.data, axis=axis).copy(), (a,), backward, "flip")


def pad2d(a, pads, value=0.0):
    """Constant-pad the two trailing (spatial) axes of an [N,C,H,W] tensor.

    ``pads`` is (top, bottom, left, right). The padded band carries no
    gradient; backward crops.
    """
    t, b, l, r = pads
    spec = [(0, 0)] * (a.ndim - 2) + [(t, b), (l, r)]
    data = np.pad(a.data, spec, mode="constant", constant_values=value)
    H, W = a.shape[-2], a.shape[-1]

    def backward(g):
        return (g[..., t:t + H, l:l + W],)

    return _make(data, (a,), backward, "pad2d")


# -- convolution ---------------------------------------------------------------

def _resolve_padding(padding, kh, kw, stride):
    if padding == "valid":
        return 0, 0
    if padding == "same":
        if stride != 1 or kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError("'same' padding requires stride 1 and odd kernels")
        return kh // 2, kw // 2
    p = int(padding)
    if p < 0:
        raise ShapeError(f"padding must be >= 0, got {p}")
    return p, p


def _pad_spatial(x, ph, pw, value=0.0):
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)),
                  mode="constant", constant_values=value)


def _im2col(xp, kh, kw, stride):
    """[N,C,Hp,Wp] -> cols [N, Ho*Wo, C*kh*kw] for cross-correlation.

    Patch-major layout so the weight-gradient contraction in backward can
    flatten it to a matrix view instead of copying it again.
    """
    N, C, Hp, Wp = xp.shape
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]                   # [N,C,Ho,Wo,kh,kw]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(N, Ho * Wo, C * kh * kw)
    return np.ascontiguousarray(cols), Ho, Wo


def _col2im(dcols, xp_shape, kh, kw, stride):
    """Scatter-add column gradients back onto the padded input."""
    N, C, Hp, Wp = xp_shape
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    d = dcols.reshape(N, C, kh, kw, Ho, Wo)
    dxp = np.zeros(xp_shape, dtype=dcols.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + Ho * stride:stride, j:j + Wo * stride:stride] += d[:, :, i, j]
    return dxp


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-D cross-correlation of [N,C,H,W] with [Co,Ci,kh,kw], optional bias [Co].

    Gradients are defined w.r.t. input, weight, and bias; when the weight
    needs a gradient the im2col columns are kept for backward.
    """
    if x.ndim != 4:
        raise ShapeError(f"conv2d: input must be [N,C,H,W], got shape {x.shape}")
    if weight.ndim != 4:
        raise ShapeError(f"conv2d: weight must be [Co,Ci,kh,kw], got shape {weight.shape}")
    N, C, H, W = x.shape
    Co, Ci, kh, kw = weight.shape
    if Ci != C:
        raise ShapeError(f"conv2d: input has {C} channels but weight expects {Ci} "
                         f"(input {x.shape}, weight {weight.shape})")
    if bias is not None and bias.shape != (Co,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} != ({Co},)")
    ph, pw = _resolve_padding(padding, kh, kw, stride)
    if H + 2 * ph < kh or W + 2 * pw < kw:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than padded input "
                         f"{H + 2 * ph}x{W + 2 * pw}")

    xd = x.data
    wd = weight.data
    xp = _pad_spatial(xd, ph, pw)
    cols, Ho, Wo = _im2col(xp, kh, kw, stride)
    wmat = wd.reshape(Co, Ci * kh * kw)
    out = np.matmul(wmat, cols.transpose(0, 2, 1)).reshape(N, Co, Ho, Wo)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    parents = (x, weight) if bias is None else (x, weight, bias)
    cols_kept = cols if weight.requires_grad else None

    def backward(g):
        gmat = g.reshape(N, Co, Ho * Wo)
        gx = gw = gb = None
        if x.requires_grad:
            dcols = np.matmul(wmat.T, gmat)
            dxp = _col2im(dcols, xp.shape, kh, kw, stride)
            gx = dxp[:, :, ph:ph + H, pw:pw + W] if (ph or pw) else dxp
        if weight.requires_grad:
            cols_b = (cols_kept if cols_kept is not None
                      else _im2col(xp, kh, kw, stride)[0])
            gw = np.tensordot(gmat, cols_b, axes=([0, 2], [0, 1])).reshape(wd.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw) if bias is None else (gx, gw, gb)

    return _make(out, parents, backward, "conv2d")


def depthwise_conv2d(x, weight, bias=None, stride=1, padding=0):
    """Per-channel convolution: weight [C,1,kh,kw], one filter per input channel."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("depthwise_conv2d expects 4-D input and weight")
    N, C, H, W = x.shape
    Cw, one, kh, kw = weight.shape
    if Cw != C or one != 1:
        raise ShapeError(f"depthwise_conv2d: weight must be [{C},1,kh,kw], got {weight.shape}")
    if bias is not None and bias.shape != (C,):
        raise ShapeError(f"depthwise_conv2d: bias shape {bias.shape} != ({C},)")
    ph, pw = _resolve_padding(padding, kh, kw, stride)

    xd, wd = x.data, weight.data
    xp = _pad_spatial(xd, ph, pw)
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]                   # [N,C,Ho,Wo,kh,kw]
    out = np.einsum("nchwij,cij->nchw", win, wd[:, 0], optimize=True)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    Ho, Wo = out.shape[2], out.shape[3]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gx = gw = gb = None
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i:i + Ho * stride:stride, j:j + Wo * stride:stride] += (
                        g * wd[None, :, 0, i, j, None, None])
            gx = dxp[:, :, ph:ph + H, pw:pw + W] if (ph or pw) else dxp
        if weight.requires_grad:
            win_b = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
            win_b = win_b[:, :, ::stride, ::stride]
            gw = np.einsum("nchwij,nchw->cij", win_b, g, optimize=True)[:, None]
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw) if bias is None else (gx, gw, gb)

    return _make(out, parents, backward, "depthwise_conv2d")


def depthwise_separable_conv2d(x, depthwise_weight, pointwise_weight, bias=None,
                               stride=1, padding=0):
    """Depthwise conv followed by a 1x1 pointwise conv (bias on the pointwise)."""
    mid = depthwise_conv2d(x, depthwise_weight, stride=stride, padding=padding)
    return conv2d(mid, pointwise_weight, bias=bias, stride=1, padding=0)


# -- pooling ---------------------------------------------------------------------

def maxpool2d(x, size, stride=1, padding=0):
    """Window max; gradient routes to the first argmax in row-major order.

    Padding uses -inf so padded cells are never selected.
    """
    if size < 1:
        raise ShapeError(f"maxpool2d: size must be >= 1, got {size}")
    N, C, H, W = x.shape
    ph, pw = _resolve_padding(padding, size, size, stride)
    if H + 2 * ph < size or W + 2 * pw < size:
        raise ShapeError(f"maxpool2d: window {size} larger than padded input")
    xp = _pad_spatial(x.data, ph, pw, value=-np.inf)
    win = np.lib.stride_tricks.sliding_window_view(xp, (size, size), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    Ho, Wo = win.shape[2], win.shape[3]
    flat = win.reshape(N, C, Ho, Wo, size * size)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        dxp = np.zeros(xp.shape, dtype=g.dtype)
        di, dj = np.divmod(arg, size)
        n_i, c_i, h_i, w_i = np.indices(arg.shape)
        rows = h_i * stride + di
        cols = w_i * stride + dj
        np.add.at(dxp, (n_i, c_i, rows, cols), g)
        return (dxp[:, :, ph:ph + H, pw:pw + W] if (ph or pw) else dxp,)

    return _make(np.ascontiguousarray(out), (x,), backward, "maxpool2d")


def avgpool2d(x, size, stride=1, padding=0):
    """Window mean over in-bounds cells (padding excluded from the count)."""
    if size < 1:
        raise ShapeError(f"avgpool2d: size must be >= 1, got {size}")
    N, C, H, W = x.shape
    ph, pw = _resolve_padding(padding, size, size, stride)
    if H + 2 * ph < size or W + 2 * pw < size:
        raise ShapeError(f"avgpool2d: window {size} larger than padded input")
    xp = _pad_spatial(x.data, ph, pw)
    ones = _pad_spatial(np.ones((1, 1, H, W), dtype=x.dtype), ph, pw)

    def pooled_sum(arr):
        win = np.lib.stride_tricks.sliding_window_view(arr, (size, size), axis=(2, 3))
        return win[:, :, ::stride, ::stride].sum(axis=(-2, -1))

    counts = pooled_sum(ones)
    out = pooled_sum(xp) / counts
    Ho, Wo = out.shape[2], out.shape[3]

    def backward(g):
        gw = g / counts
        dxp = np.zeros(xp.shape, dtype=g.dtype)
        for i in range(size):
            for j in range(size):
                dxp[:, :, i:i + Ho * stride:stride, j:j + Wo * stride:stride] += gw
        return (dxp[:, :, ph:ph + H, pw:pw + W] if (ph or pw) else dxp,)

    return _make(np.ascontiguousarray(out), (x,), backward, "avgpool2d")


# -- interpolation ----------------------------------------------------------------

def _upsample_target(H, W, scale, size):
    if size is not None:
        return int(size[0]), int(size[1])
    if scale is None or scale < 1:
        raise ShapeError(f"upsample2d: scale must be >= 1, got {scale}")
    return H * int(scale), W * int(scale)


def upsample2d(x, mode, scale=None, size=None):
    """Nearest or bilinear (align-corners) upsampling to scale*H or an explicit size."""
    if mode not in ("nearest", "bilinear"):
        raise ShapeError(f"upsample2d: unknown mode {mode!r}")
    N, C, H, W = x.shape
    Ho, Wo = _upsample_target(H, W, scale, size)
    xd = x.data

    if mode == "nearest":
        ri = np.minimum((np.arange(Ho) * H) // Ho, H - 1)
        ci = np.minimum((np.arange(Wo) * W) // Wo, W - 1)
        out = xd[:, :, ri[:, None], ci[None, :]]

        def backward(g):
            gx = np.zeros_like(xd)
            np.add.at(gx, (slice(None), slice(None), ri[:, None], ci[None, :]), g)
            return (gx,)

        return _make(np.ascontiguousarray(out), (x,), backward, "upsample_nearest")

    # bilinear, align-corners: endpoints map exactly onto endpoints
    src_r = np.arange(Ho) * ((H - 1) / (Ho - 1)) if Ho > 1 else np.zeros(Ho)
    src_c = np.arange(Wo) * ((W - 1) / (Wo - 1)) if Wo > 1 else np.zeros(Wo)
    r0 = np.floor(src_r).astype(int)
    c0 = np.floor(src_c).astype(int)
    r0 = np.minimum(r0, H - 1)
    c0 = np.minimum(c0, W - 1)
    r1 = np.minimum(r0 + 1, H - 1)
    c1 = np.minimum(c0 + 1, W - 1)
    fr = (src_r - r0)[:, None]
    fc = (src_c - c0)[None, :]
    w00 = (1 - fr) * (1 - fc)
    w01 = (1 - fr) * fc
    w10 = fr * (1 - fc)
    w11 = fr * fc

    R0, C0 = r0[:, None], c0[None, :]
    R1, C1 = r1[:, None], c1[None, :]
    out = (w00 * xd[:, :, R0, C0] + w01 * xd[:, :, R0, C1]
           + w10 * xd[:, :, R1, C0] + w11 * xd[:, :, R1, C1])

    def backward(g):
        gx = np.zeros_like(xd)
        np.add.at(gx, (slice(None), slice(None), R0, C0), g * w00)
        np.add.at(gx, (slice(None), slice(None), R0, C1), g * w01)
        np.add.at(gx, (slice(None), slice(None), R1, C0), g * w10)
        np.add.at(gx, (slice(None), slice(None), R1, C1), g * w11)
        return (gx,)

    return _make(np.ascontiguousarray(out), (x,), backward, "upsample_bilinear")


# -- normalization -----------------------------------------------------------------

def group_norm(x, groups, gamma, beta, eps=1e-5):
    """Standardize per (sample, channel group), then per-channel affine."""
    N, C, H, W = x.shape
    if C % groups != 0:
        raise ShapeError(f"group_norm: {C} channels not divisible by {groups} groups")
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"group_norm: gamma/beta must be shape ({C},)")
    gsz = C // groups
    xd = x.data.reshape(N, groups, gsz * H * W)
    mu = xd.mean(axis=2, keepdims=True)
    var = xd.var(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv_std                              # [N,G,m]
    xhat4 = xhat.reshape(N, C, H, W)
    gam = gamma.data[None, :, None, None]
    out = gam * xhat4 + beta.data[None, :, None, None]

    def backward(g):
        gxhat = (g * gam).reshape(N, groups, gsz * H * W)
        gx = gg = gb = None
        if x.requires_grad:
            m1 = gxhat.mean(axis=2, keepdims=True)
            m2 = (gxhat * xhat).mean(axis=2, keepdims=True)
            gx = ((gxhat - m1 - xhat * m2) * inv_std).reshape(N, C, H, W)
        if gamma.requires_grad:
            gg = (g * xhat4).sum(axis=(0, 2, 3))
        if beta.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gg, gb

    return _make(out, (x, gamma, beta), backward, "group_norm")


def log_softmax(x):
    """Log-softmax over a 1-D tensor."""
    if x.ndim != 1:
        raise ShapeError(f"log_softmax expects a 1-D tensor, got shape {x.shape}")
    xd = x.data
    m = xd.max()
    z = xd - m
    lse = np.log(np.exp(z).sum())
    out = z - lse

    def backward(g):
        return (g - np.exp(out) * g.sum(),)

    return _make(out, (x,), backward, "log_softmax")
