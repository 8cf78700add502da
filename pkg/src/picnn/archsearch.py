"""Architecture search: multi-trial RL, ENAS weight sharing, and DARTS.

All three strategies operate on the slot spaces from :mod:`picnn.networks`.
Multi-trial search trains every sampled genome from scratch through an
injected trainer; ENAS and DARTS share one supernet that holds every
candidate operation side by side, either sampling discrete paths (ENAS)
or mixing all of them with softmax weights (DARTS).
"""

from __future__ import annotations

import csv
import logging
import math
import threading
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from .controller import Controller, reward_from_error
from .networks import (
    CNN_CHANNELS, DOWN_OPS, UNET_CHANNELS, UNET_CONV_OPS, UP_OPS,
    Conv, GroupNorm, Module, Upsample, make_op, random_choices, search_space,
)
from .optim import AdamState, adam_step, clear_grads
from .tensor import Tensor, concat, slice_axis

__all__ = [
    "SearchDiverged", "MixedOpNode", "SuperBlock", "CnnSupernet",
    "UnetSupernet", "build_supernet", "active_param_mask", "softmax_probs",
    "darts_mixed_forward", "DartsState", "init_darts", "darts_search",
    "enas_search", "ArchTrial", "MultiTrialResult", "multi_trial_search",
    "write_arch_ledger", "random_subnetworks",
]

logger = logging.getLogger(__name__)

# Error assigned to diverged / crashed trials before the reward transform.
DIVERGED_ERROR = 1e8


class SearchDiverged(RuntimeError):
    """A weight-sharing search produced a non-finite loss."""


def _make_candidate(name, cin, cout, rng):
    if name in UP_OPS:
        return Upsample(name)
    op, out = make_op(name, cin, cout, rng)
    if out != cout:
        # pools keep their input channels; only legal where cin == cout
        raise ValueError(f"candidate {name!r} yields {out} channels in a "
                         f"{cout}-channel slot")
    return op


def _apply(op, x, size):
    return op(x, size) if isinstance(op, Upsample) else op(x)


class MixedOpNode(Module):
    """Every candidate op of one decision, applied to a shared input.

    `mixed` blends the candidate outputs with a probability vector on the
    tape; `one` runs a single candidate. Nodes remember which slot they
    answer to so that shared-cell supernets can reuse one slot's decision
    at several structural positions.
    """

    def __init__(self, slot_name, candidates, cin, cout, rng):
        super().__init__()
        self.slot_name = slot_name
        self.candidates = tuple(candidates)
        self.ops = [self.child(_make_candidate(n, cin, cout, rng))
                    for n in self.candidates]

    def mixed(self, x, probs, size=None):
        out = None
        for k, op in enumerate(self.ops):
            w = slice_axis(probs, 0, k, k + 1).reshape(())
            term = _apply(op, x, size) * w
            out = term if out is None else out + term
        return out

    def one(self, x, k, size=None):
        return _apply(self.ops[k], x, size)

    def index(self, choice):
        return self.candidates.index(choice)


class SuperBlock(Module):
    """Supernet counterpart of DoubleConv / CellConvPair: two mixed conv
    nodes with their own norms, optionally joined by the cell skip."""

    def __init__(self, slot_a, slot_b, cin, cout, rng, inner_skip):
        super().__init__()
        self.inner_skip = inner_skip
        self.node_a = self.child(MixedOpNode(slot_a, UNET_CONV_OPS, cin, cout, rng))
        self.na = self.child(GroupNorm(cout))
        self.node_b = self.child(MixedOpNode(slot_b, UNET_CONV_OPS, cout, cout, rng))
        self.nb = self.child(GroupNorm(cout))

    def mixed(self, x, probs):
        a = self.na(self.node_a.mixed(x, probs[self.node_a.slot_name])).gelu()
        b = self.nb(self.node_b.mixed(a, probs[self.node_b.slot_name])).gelu()
        return a + b if self.inner_skip else b

    def discrete(self, x, choices):
        a = self.na(self.node_a.one(x, self.node_a.index(choices[self.node_a.slot_name]))).gelu()
        b = self.nb(self.node_b.one(a, self.node_b.index(choices[self.node_b.slot_name]))).gelu()
        return a + b if self.inner_skip else b

    def mixed_nodes(self):
        return [self.node_a, self.node_b]


class CnnSupernet(Module):
    """Weight-sharing host for the stacked-CNN space."""

    def __init__(self, rng, in_channels=1):
        super().__init__()
        self.kind = "cnn_stack"
        self.space = search_space("cnn_stack", supernet=True)
        self.nodes = []
        cur = in_channels
        for i, slot in enumerate(self.space.slots):
            node = MixedOpNode(slot.name, slot.candidates, cur,
                               CNN_CHANNELS[i], rng)
            self.nodes.append(self.child(node))
            cur = CNN_CHANNELS[i]
        self.head = self.child(Conv(cur, 1, 3, rng))

    def forward_mixed(self, x, probs):
        for node in self.nodes:
            x = node.mixed(x, probs[node.slot_name]).relu()
        return self.head(x)

    def forward_discrete(self, x, choices):
        for node in self.nodes:
            x = node.one(x, node.index(choices[node.slot_name])).relu()
        return self.head(x)

    def mixed_nodes(self):
        return list(self.nodes)


class UnetSupernet(Module):
    """Weight-sharing host for the UNet spaces.

    The skeleton mirrors :class:`picnn.networks.UNet`: three down and three
    up stages around a bottleneck with skip concatenation. In the cell
    space the six cell slots steer every stage (the stem reuses the down
    cell's conv pair) and blocks carry the cell's inner skip.
    """

    def __init__(self, kind, rng, in_channels=1):
        super().__init__()
        if kind not in ("unet_entire", "unet_cell"):
            raise ValueError(f"unknown UNet space {kind!r}")
        self.kind = kind
        self.space = search_space(kind, supernet=True)
        cell = kind == "unet_cell"
        c1, c2, c3, c4 = UNET_CHANNELS

        def conv_slots(stage, up=False):
            if cell:
                pre = "up" if up else "down"
                return f"{pre}_conv_a", f"{pre}_conv_b"
            return f"{stage}_conv", f"{stage}_conv"

        def down_slot(i):
            return "down_op" if cell else f"down{i}"

        def up_slot(i):
            return "up_op" if cell else f"up{i}"

        def blk(stage, cin, cout, up=False):
            a, b = conv_slots(stage, up)
            return SuperBlock(a, b, cin, cout, rng, inner_skip=cell)

        self.enc1 = self.child(blk("enc1", in_channels, c1))
        self.down1 = self.child(MixedOpNode(down_slot(1), DOWN_OPS, c1, c1, rng))
        self.enc2 = self.child(blk("enc2", c1, c2))
        self.down2 = self.child(MixedOpNode(down_slot(2), DOWN_OPS, c2, c2, rng))
        self.enc3 = self.child(blk("enc3", c2, c3))
        self.down3 = self.child(MixedOpNode(down_slot(3), DOWN_OPS, c3, c3, rng))
        self.bottleneck = self.child(blk("bottleneck", c3, c4))
        self.up3 = self.child(MixedOpNode(up_slot(3), UP_OPS, c4, c4, rng))
        self.dec3 = self.child(blk("dec3", c4 + c3, c3, up=True))
        self.up2 = self.child(MixedOpNode(up_slot(2), UP_OPS, c3, c3, rng))
        self.dec2 = self.child(blk("dec2", c3 + c2, c2, up=True))
        self.up1 = self.child(MixedOpNode(up_slot(1), UP_OPS, c2, c2, rng))
        self.dec1 = self.child(blk("dec1", c2 + c1, c1, up=True))
        self.head = self.child(Conv(c1, 1, 1, rng))

    def _forward(self, x, block, sample):
        e1 = block(self.enc1, x)
        e2 = block(self.enc2, sample(self.down1, e1, None))
        e3 = block(self.enc3, sample(self.down2, e2, None))
        b = block(self.bottleneck, sample(self.down3, e3, None))
        d3 = block(self.dec3, concat([sample(self.up3, b, e3.shape[2:]), e3], axis=1))
        d2 = block(self.dec2, concat([sample(self.up2, d3, e2.shape[2:]), e2], axis=1))
        d1 = block(self.dec1, concat([sample(self.up1, d2, e1.shape[2:]), e1], axis=1))
        return self.head(d1)

    def forward_mixed(self, x, probs):
        return self._forward(
            x,
            lambda blk, t: blk.mixed(t, probs),
            lambda node, t, size: node.mixed(t, probs[node.slot_name], size=size),
        )

    def forward_discrete(self, x, choices):
        return self._forward(
            x,
            lambda blk, t: blk.discrete(t, choices),
            lambda node, t, size: node.one(t, node.index(choices[node.slot_name]),
                                           size=size),
        )

    def mixed_nodes(self):
        nodes = []
        for blk in (self.enc1, self.enc2, self.enc3, self.bottleneck,
                    self.dec3, self.dec2, self.dec1):
            nodes.extend(blk.mixed_nodes())
        nodes.extend([self.down1, self.down2, self.down3,
                      self.up3, self.up2, self.up1])
        return nodes


def build_supernet(kind, rng, in_channels=1):
    if kind == "cnn_stack":
        return CnnSupernet(rng, in_channels)
    return UnetSupernet(kind, rng, in_channels)


def active_param_mask(supernet, choices):
    """Boolean mask over supernet.parameters(): True for parameters on the
    path selected by `choices` (all structurally shared parameters — norms,
    head — stay active; only unchosen candidate ops are frozen)."""
    supernet.space.validate(choices)
    inactive = set()
    for node in supernet.mixed_nodes():
        keep = node.index(choices[node.slot_name])
        for k, op in enumerate(node.ops):
            if k != keep:
                inactive.update(id(p) for p in op.parameters())
    return [id(p) not in inactive for p in supernet.parameters()]


def softmax_probs(alpha):
    """Softmax of a logit vector on the tape (constant max shift)."""
    z = alpha - float(np.max(alpha.data))
    e = z.exp()
    return e / e.sum()


def darts_mixed_forward(supernet, alphas, x):
    """Softmax-relaxed forward: every slot blends all its candidates with
    the probabilities induced by its logits."""
    probs = {name: softmax_probs(a) for name, a in alphas.items()}
    return supernet.forward_mixed(x, probs)


@dataclass
class DartsState:
    """Architecture logits per slot plus the two optimizers of the
    alternating scheme (shared weights / architecture)."""

    alphas: dict
    w_params: list
    w_state: AdamState
    a_state: AdamState

    def decode(self, space):
        return {name: space.slot(name).candidates[int(np.argmax(a.data))]
                for name, a in self.alphas.items()}


def init_darts(supernet, lr_w=1e-3, lr_a=3e-3):
    alphas = {s.name: Tensor(np.zeros(len(s.candidates)), requires_grad=True)
              for s in supernet.space.slots}
    w_params = supernet.parameters()
    return DartsState(alphas, w_params,
                      AdamState(w_params, lr=lr_w),
                      AdamState(list(alphas.values()), lr=lr_a))


def _check_finite(value, what, step, history, ledger_path, space):
    if math.isfinite(value):
        return
    if ledger_path is not None:
        _write_history(ledger_path, history)
    raise SearchDiverged(f"{what} became {value!r} at step {step}")


def darts_search(supernet, loss_train, loss_val, steps, lr_w=1e-3, lr_a=3e-3,
                 state=None, ledger_path=None):
    """First-order alternation: shared weights descend the training loss,
    architecture logits descend the validation loss; decode by argmax.

    `loss_train` / `loss_val` map a forward callable (input -> output
    tensor) to a scalar loss tensor.  Returns (choices, state, history).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    st = state if state is not None else init_darts(supernet, lr_w, lr_a)
    alpha_list = list(st.alphas.values())
    history = []
    for step in range(steps):
        probs = {name: softmax_probs(a) for name, a in st.alphas.items()}
        for name, p in probs.items():
            total = float(np.sum(p.data))
            assert abs(total - 1.0) <= 1e-9, (name, total)
        forward = lambda x, _p=probs: supernet.forward_mixed(x, _p)

        t_loss = loss_train(forward)
        tv = float(t_loss.data)
        _check_finite(tv, "training loss", step, history, ledger_path,
                      supernet.space)
        clear_grads(st.w_params + alpha_list)
        t_loss.backward()
        adam_step(st.w_params, st.w_state)

        probs = {name: softmax_probs(a) for name, a in st.alphas.items()}
        forward = lambda x, _p=probs: supernet.forward_mixed(x, _p)
        v_loss = loss_val(forward)
        vv = float(v_loss.data)
        _check_finite(vv, "validation loss", step, history, ledger_path,
                      supernet.space)
        clear_grads(st.w_params + alpha_list)
        v_loss.backward()
        adam_step(alpha_list, st.a_state)

        history.append({"step": step, "train_loss": tv, "val_loss": vv})
    if ledger_path is not None:
        _write_history(ledger_path, history)
    return st.decode(supernet.space), st, history


def enas_search(supernet, controller, loss_train, eval_error, steps, rng,
                lr_w=1e-3, w_state=None, ledger_path=None):
    """Weight-sharing alternation.  Each step (a) samples a genome and
    trains only its activated subgraph for one step on the training loss,
    then (b) samples again, scores it on frozen shared weights, and
    applies one REINFORCE update.  Decode is the controller's argmax.

    `loss_train(choices) -> Tensor` and `eval_error(choices) -> float`
    close over the supernet and the data.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    params = supernet.parameters()
    st = w_state if w_state is not None else AdamState(params, lr=lr_w)
    history = []
    for step in range(steps):
        choices, _ = controller.sample(rng)
        loss = loss_train(choices)
        tv = float(loss.data)
        _check_finite(tv, "training loss", step, history, ledger_path,
                      supernet.space)
        clear_grads(params)
        loss.backward()
        adam_step(params, st, active=active_param_mask(supernet, choices))

        sampled, log_probs = controller.sample(rng)
        err = float(eval_error(sampled))
        _check_finite(err, "validation error", step, history, ledger_path,
                      supernet.space)
        reward = reward_from_error(err)
        controller.reinforce(log_probs, reward)
        history.append({"step": step, "train_loss": tv,
                        "val_error": err, "reward": reward})
    if ledger_path is not None:
        _write_history(ledger_path, history)
    return controller.argmax_choices(), st, history


@dataclass
class ArchTrial:
    index: int
    choices: dict
    error: float
    reward: float
    failed: bool = False


@dataclass
class MultiTrialResult:
    best_choices: dict
    best_error: float
    best_reward: float
    trials: list = field(default_factory=list)
    controller: Controller = None


def multi_trial_search(space, train_fn, budget, rng, workers=1,
                       controller=None, ledger_path=None):
    """Sample genomes from a REINFORCE controller, train each from scratch
    through `train_fn(choices) -> validation error`, and feed rewards back.

    Trials may run concurrently; sampling and controller updates are
    serialized (completed trials are settled in index order within each
    completion batch).  A trial that raises or returns a non-finite error
    is logged and scored with a clamped error instead of aborting the
    search.  Returns the highest-reward genome.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    ctrl = controller if controller is not None else Controller(space, rng)
    trials = []
    lock = threading.Lock()

    def settle(index, choices, log_probs, error, failed):
        error = float(error)
        if not math.isfinite(error):
            logger.warning("trial %d produced error %r; clamped to %g",
                           index, error, DIVERGED_ERROR)
            error, failed = DIVERGED_ERROR, True
        reward = reward_from_error(error)
        ctrl.reinforce(log_probs, reward)
        trials.append(ArchTrial(index, dict(choices), error, reward, failed))

    def run_one(choices):
        try:
            return float(train_fn(dict(choices))), False
        except Exception:
            logger.exception("trial crashed; scoring with clamped error")
            return DIVERGED_ERROR, True

    submitted = 0
    inflight = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while submitted < budget or inflight:
            while submitted < budget and len(inflight) < workers:
                with lock:
                    choices, log_probs = ctrl.sample(rng)
                fut = pool.submit(run_one, choices)
                inflight[fut] = (submitted, choices, log_probs)
                submitted += 1
            done, _ = wait(inflight, return_when=FIRST_COMPLETED)
            for fut in sorted(done, key=lambda f: inflight[f][0]):
                index, choices, log_probs = inflight.pop(fut)
                error, failed = fut.result()
                with lock:
                    settle(index, choices, log_probs, error, failed)

    best = max(trials, key=lambda t: t.reward)
    if ledger_path is not None:
        write_arch_ledger(ledger_path, space, trials)
    return MultiTrialResult(best.choices, best.error, best.reward,
                            trials, ctrl)


def write_arch_ledger(path, space, trials):
    names = [s.name for s in space.slots]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", *names, "error", "reward", "failed"])
        for t in trials:
            w.writerow([t.index, *(t.choices[n] for n in names),
                        f"{t.error:.10g}", f"{t.reward:.10g}", int(t.failed)])


def _write_history(path, history):
    with open(path, "w", newline="") as fh:
        if not history:
            fh.write("")
            return
        w = csv.DictWriter(fh, fieldnames=list(history[0]))
        w.writeheader()
        w.writerows(history)


def random_subnetworks(kind, n=5, seed=20260301):
    """The fixed panel of randomly drawn genomes used as default network
    structures when scoring loss candidates (seed pinned so every run and
    every machine scores against the same panel)."""
    rng = np.random.default_rng(seed)
    space = search_space(kind)
    return [random_choices(space, rng) for _ in range(n)]
