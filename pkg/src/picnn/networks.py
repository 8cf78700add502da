"""Network modules and the three architecture search spaces.

Spaces:

  cnn_stack     stacked same-padding convolutions with ReLU, channel
                plan [16, 32, 32, 16] plus a conv head to one channel.
                Candidates per layer: 3/5/7 standard and depthwise-
                separable convolutions; the two middle layers also offer
                size-3 stride-1 max/average pooling. A pooling layer
                keeps its input channel count, and the next conv bridges
                to the planned width (adaptive decode).

  unet_entire   UNet with three downsampling and three upsampling stages
                (channels 32/64/128/256), GroupNorm + GeLU, skip
                concatenations, pool-2 downsampling, interpolation
                upsampling to the exact skip size (odd grids shrink by
                floor division). Every stage's conv op and every down/up
                op are searched independently: 13 slots.

  unet_cell     same skeleton, but built from two repeated cells: a
                downsample cell (sampling op + two conv nodes) used at
                every encoder stage and an upsample cell used at every
                decoder stage. The two conv nodes chain with one skip
                (out = a + b(a)); the stem reuses the down cell's convs.
                Six slots.

Weight-sharing searches need fixed tensor shapes and mixable outputs,
so ``search_space(kind, supernet=True)`` drops the 7x7 kernels and
restricts pooling candidates to channel-preserving slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    Tensor, concat, conv2d, depthwise_separable_conv2d,
    group_norm, maxpool2d, avgpool2d, upsample2d,
)

__all__ = [
    "Module", "SlotSpec", "SearchSpace", "search_space",
    "default_choices", "random_choices", "build_network",
    "CONV_OPS", "UNET_CONV_OPS", "POOL_OPS", "DOWN_OPS", "UP_OPS",
]

CONV_OPS = ("conv3", "conv5", "conv7", "dwsep3", "dwsep5", "dwsep7")
UNET_CONV_OPS = ("conv3", "conv5", "dwsep3", "dwsep5")
POOL_OPS = ("maxpool3", "avgpool3")
DOWN_OPS = ("maxpool2", "avgpool2")
UP_OPS = ("bilinear", "nearest")

CNN_CHANNELS = (16, 32, 32, 16)
UNET_CHANNELS = (32, 64, 128, 256)
GN_GROUPS = 8


class Module:
    """Minimal parameter container; subclasses register params and children."""

    def __init__(self):
        self._params = []
        self._children = []

    def param(self, array):
        t = Tensor(array, requires_grad=True)
        self._params.append(t)
        return t

    def child(self, module):
        self._children.append(module)
        return module

    def parameters(self):
        out = list(self._params)
        for c in self._children:
            out.extend(c.parameters())
        return out

    def n_parameters(self):
        return sum(p.size for p in self.parameters())


class Conv(Module):
    def __init__(self, cin, cout, k, rng, bias=True):
        super().__init__()
        std = np.sqrt(2.0 / (cin * k * k))
        self.weight = self.param(rng.normal(0.0, std, (cout, cin, k, k)))
        self.bias = self.param(np.zeros(cout)) if bias else None

    def __call__(self, x):
        return conv2d(x, self.weight, self.bias, padding="same")


class DwSepConv(Module):
    def __init__(self, cin, cout, k, rng, bias=True):
        super().__init__()
        self.dw = self.param(rng.normal(0.0, np.sqrt(2.0 / (k * k)), (cin, 1, k, k)))
        self.pw = self.param(rng.normal(0.0, np.sqrt(2.0 / cin), (cout, cin, 1, 1)))
        self.bias = self.param(np.zeros(cout)) if bias else None

    def __call__(self, x):
        return depthwise_separable_conv2d(x, self.dw, self.pw, self.bias, padding="same")


class Pool(Module):
    def __init__(self, kind, size, stride, padding):
        super().__init__()
        self.fn = maxpool2d if kind == "max" else avgpool2d
        self.size, self.stride, self.padding = size, stride, padding

    def __call__(self, x):
        return self.fn(x, self.size, stride=self.stride, padding=self.padding)


class Upsample(Module):
    def __init__(self, mode):
        super().__init__()
        self.mode = mode

    def __call__(self, x, size):
        return upsample2d(x, self.mode, size=size)


class GroupNorm(Module):
    def __init__(self, channels, groups=GN_GROUPS):
        super().__init__()
        if channels % groups != 0:
            raise ValueError(f"{channels} channels not divisible by {groups} groups")
        self.groups = groups
        self.gamma = self.param(np.ones(channels))
        self.beta = self.param(np.zeros(channels))

    def __call__(self, x):
        return group_norm(x, self.groups, self.gamma, self.beta)


def make_op(name, cin, cout, rng):
    """Instantiate a candidate op; returns (module, actual output channels)."""
    if name.startswith("conv"):
        k = int(name[4:])
        return Conv(cin, cout, k, rng), cout
    if name.startswith("dwsep"):
        k = int(name[5:])
        return DwSepConv(cin, cout, k, rng), cout
    if name in POOL_OPS:
        return Pool(name[:3], 3, 1, "same"), cin
    if name in DOWN_OPS:
        return Pool(name[:3], 2, 2, 0), cin
    raise ValueError(f"unknown op {name!r}")


@dataclass(frozen=True)
class SlotSpec:
    name: str
    candidates: tuple


@dataclass(frozen=True)
class SearchSpace:
    kind: str
    slots: tuple

    @property
    def size(self):
        n = 1
        for s in self.slots:
            n *= len(s.candidates)
        return n

    def slot(self, name):
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(name)

    def validate(self, choices):
        for s in self.slots:
            if s.name not in choices:
                raise ValueError(f"missing choice for slot {s.name!r}")
            if choices[s.name] not in s.candidates:
                raise ValueError(f"slot {s.name!r}: {choices[s.name]!r} not in "
                                 f"{s.candidates}")
        extra = set(choices) - {s.name for s in self.slots}
        if extra:
            raise ValueError(f"choices for unknown slots: {sorted(extra)}")


_UNET_ENTIRE_SLOTS = (
    ("enc1_conv", "conv"), ("down1", "down"), ("enc2_conv", "conv"),
    ("down2", "down"), ("enc3_conv", "conv"), ("down3", "down"),
    ("bottleneck_conv", "conv"),
    ("up3", "up"), ("dec3_conv", "conv"),
    ("up2", "up"), ("dec2_conv", "conv"),
    ("up1", "up"), ("dec1_conv", "conv"),
)
_UNET_CELL_SLOTS = (
    ("down_op", "down"), ("down_conv_a", "conv"), ("down_conv_b", "conv"),
    ("up_op", "up"), ("up_conv_a", "conv"), ("up_conv_b", "conv"),
)


def search_space(kind, supernet=False):
    """Slot/candidate table for a space; ``supernet=True`` gives the
    restricted variant usable by weight-sharing searches."""
    if kind == "cnn_stack":
        convs = ("conv3", "conv5", "dwsep3", "dwsep5") if supernet else CONV_OPS
        slots = []
        cur_matches = [False, False, True, False]   # cin == cout only at layer 3
        for i in range(4):
            cands = convs
            if i in (1, 2):   # middle layers may pool
                if not supernet or cur_matches[i]:
                    cands = cands + POOL_OPS
            slots.append(SlotSpec(f"layer{i + 1}", tuple(cands)))
        return SearchSpace(kind, tuple(slots))
    if kind == "unet_entire":
        table = _UNET_ENTIRE_SLOTS
    elif kind == "unet_cell":
        table = _UNET_CELL_SLOTS
    else:
        raise ValueError(f"unknown search space {kind!r}")
    groups = {"conv": UNET_CONV_OPS, "down": DOWN_OPS, "up": UP_OPS}
    return SearchSpace(kind, tuple(SlotSpec(n, groups[g]) for n, g in table))


def default_choices(kind):
    """The hand-designed baseline: plain 3x3 convs, max pooling, bilinear."""
    out = {}
    for slot in search_space(kind).slots:
        if "conv3" in slot.candidates:
            out[slot.name] = "conv3"
        elif "maxpool2" in slot.candidates:
            out[slot.name] = "maxpool2"
        else:
            out[slot.name] = "bilinear"
    return out


def random_choices(space, rng):
    return {s.name: s.candidates[rng.integers(len(s.candidates))] for s in space.slots}


class CnnStack(Module):
    def __init__(self, choices, in_channels, rng, channels=CNN_CHANNELS):
        super().__init__()
        space = search_space("cnn_stack")
        space.validate(choices)
        self.ops = []
        cur = in_channels
        for i, slot in enumerate(space.slots):
            op, cur = make_op(choices[slot.name], cur, channels[i], rng)
            self.ops.append(self.child(op))
        self.head = self.child(Conv(cur, 1, 3, rng))

    def __call__(self, x):
        for op in self.ops:
            x = op(x).relu()
        return self.head(x)


class DoubleConv(Module):
    """(op -> GroupNorm -> GeLU) twice with one chosen op type:
    cin -> cout -> cout."""

    def __init__(self, op_name, cin, cout, rng):
        super().__init__()
        self.a = self.child(make_op(op_name, cin, cout, rng)[0])
        self.na = self.child(GroupNorm(cout))
        self.b = self.child(make_op(op_name, cout, cout, rng)[0])
        self.nb = self.child(GroupNorm(cout))

    def __call__(self, x):
        x = self.na(self.a(x)).gelu()
        return self.nb(self.b(x)).gelu()


class CellConvPair(Module):
    """Two independently chosen conv nodes chained with one skip:
    a = f(x), out = a + g(a). Both nodes norm+activate like DoubleConv."""

    def __init__(self, op_a, op_b, cin, cout, rng):
        super().__init__()
        self.a = self.child(make_op(op_a, cin, cout, rng)[0])
        self.na = self.child(GroupNorm(cout))
        self.b = self.child(make_op(op_b, cout, cout, rng)[0])
        self.nb = self.child(GroupNorm(cout))

    def __call__(self, x):
        a = self.na(self.a(x)).gelu()
        return a + self.nb(self.b(a)).gelu()


class UNet(Module):
    """Three downsampling and three upsampling stages around a bottleneck,
    with skip concatenation at matching resolutions. unet_cell shares one
    (sampling, conv, conv) cell across the encoder and one across the
    decoder; the stem stage reuses the down cell's conv pair."""

    def __init__(self, kind, choices, in_channels, rng, channels=UNET_CHANNELS):
        super().__init__()
        space = search_space(kind)
        space.validate(choices)
        c1, c2, c3, c4 = channels
        if kind == "unet_cell":
            c = choices

            def block(_, cin, cout, up=False):
                pre = "up" if up else "down"
                return CellConvPair(c[f"{pre}_conv_a"], c[f"{pre}_conv_b"],
                                    cin, cout, rng)
            choices = {
                "down1": c["down_op"], "down2": c["down_op"],
                "down3": c["down_op"], "up3": c["up_op"],
                "up2": c["up_op"], "up1": c["up_op"],
            }
        else:
            def block(name, cin, cout, up=False):
                return DoubleConv(choices[name], cin, cout, rng)

        self.enc1 = self.child(block("enc1_conv", in_channels, c1))
        self.down1 = self.child(make_op(choices["down1"], c1, c1, rng)[0])
        self.enc2 = self.child(block("enc2_conv", c1, c2))
        self.down2 = self.child(make_op(choices["down2"], c2, c2, rng)[0])
        self.enc3 = self.child(block("enc3_conv", c2, c3))
        self.down3 = self.child(make_op(choices["down3"], c3, c3, rng)[0])
        self.bottleneck = self.child(block("bottleneck_conv", c3, c4))
        self.up3 = self.child(Upsample(choices["up3"]))
        self.dec3 = self.child(block("dec3_conv", c4 + c3, c3, up=True))
        self.up2 = self.child(Upsample(choices["up2"]))
        self.dec2 = self.child(block("dec2_conv", c3 + c2, c2, up=True))
        self.up1 = self.child(Upsample(choices["up1"]))
        self.dec1 = self.child(block("dec1_conv", c2 + c1, c1, up=True))
        self.head = self.child(Conv(c1, 1, 1, rng))

    def __call__(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(self.down1(e1))
        e3 = self.enc3(self.down2(e2))
        b = self.bottleneck(self.down3(e3))
        u3 = self.up3(b, size=e3.shape[2:])
        d3 = self.dec3(concat([u3, e3], axis=1))
        u2 = self.up2(d3, size=e2.shape[2:])
        d2 = self.dec2(concat([u2, e2], axis=1))
        u1 = self.up1(d2, size=e1.shape[2:])
        d1 = self.dec1(concat([u1, e1], axis=1))
        return self.head(d1)


def build_network(kind, choices, in_channels, rng, grid_shape=None):
    """Instantiate a network from slot choices; optionally probe a forward
    pass on the given (H, W) to fail fast on shape problems."""
    if kind == "cnn_stack":
        net = CnnStack(choices, in_channels, rng)
    elif kind in ("unet_entire", "unet_cell"):
        net = UNet(kind, choices, in_channels, rng)
    else:
        raise ValueError(f"unknown search space {kind!r}")
    if grid_shape is not None:
        H, W = grid_shape
        probe = Tensor(np.zeros((1, in_channels, H, W)))
        out = net(probe)
        if out.shape != (1, 1, H, W):
            raise ValueError(f"network maps {(H, W)} to {out.shape[2:]}, "
                             "expected same-size output")
    return net
