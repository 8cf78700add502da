"""Training loop: Adam over physics losses with per-epoch validation.

The loop is deliberately plain — fixed batch order, full determinism under
a fixed seed, and an early abort the moment the loss stops being finite.
Cumulative residue-weight schemes keep one WeightState per batch slot so
their weights accumulate across epochs exactly as during a single-batch
run.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from pathlib import Path

from .constraints import apply_hard_constraint
from .datasets import grouped_batches
from .metrics import mae, relative_l2
from .optim import AdamState, adam_step, clear_grads
from .tensor import Tensor
from .tensorio import load_tensor, save_tensor

__all__ = ["TrainConfig", "TrainResult", "train", "predict",
           "eval_metric", "write_curves", "CURVE_FIELDS",
           "save_params", "load_params"]

METRICS = {"relative_l2": relative_l2, "mae": mae}

CURVE_FIELDS = ("epoch", "train_loss", "val_metric")


@dataclass
class TrainConfig:
    epochs: int = 2000
    batch_size: int = 0          # 0 = one batch with every training sample
    lr: float = 1e-3
    metric: str = "relative_l2"
    eval_every: int = 1          # validation cadence; last epoch always runs

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass
class TrainResult:
    status: str                  # "ok" | "diverged"
    train_loss: list = field(default_factory=list)
    val_metric: list = field(default_factory=list)
    epochs_run: int = 0
    wall_clock: float = 0.0

    @property
    def final_val(self):
        return self.val_metric[-1] if self.val_metric else None




def predict(net, evaluator, split, indices=None):
    """Model prediction as a numpy array [N, 1, H, W].

    Under hard or combined constraints the prediction is the constrained
    output — that is the field the residual was trained on.  Falls back
    to per-sample constraint application when a batch cannot share one
    boundary condition.
    """
    problem = evaluator.problem
    samples = problem.splits[split]
    if indices is None:
        indices = list(range(len(samples)))
    x = samples.inputs[list(indices)]
    hard = evaluator.genome.constraint in ("hard", "combined")
    if not hard:
        return net(Tensor(x)).data
    try:
        bc = problem.bc_for(split, indices)
    except ValueError:
        rows = [apply_hard_constraint(net(Tensor(x[i:i + 1])),
                                      problem.bc_for(split, [indices[i]]),
                                      problem.h).data
                for i in range(len(indices))]
        return np.concatenate(rows, axis=0)
    return apply_hard_constraint(net(Tensor(x)), bc, problem.h).data


def eval_metric(net, evaluator, split, metric="relative_l2"):
    pred = predict(net, evaluator, split)
    truth = evaluator.problem.splits[split].truths
    return float(METRICS[metric](pred, truth))


def train(net, evaluator, config, val_split="val"):
    """Run the epoch loop; mutates `net` in place and returns a TrainResult.

    Training loss is the per-sample average over the epoch's batches; the
    validation metric is evaluated every `eval_every` epochs (carrying the
    last value in between, so the trace always has one entry per epoch).
    """
    t0 = time.perf_counter()
    problem = evaluator.problem
    samples = problem.splits["train"]
    batches = grouped_batches(problem, "train", config.batch_size)
    states = [evaluator.new_state() for _ in batches]
    params = net.parameters()
    adam = AdamState(params, lr=config.lr)
    result = TrainResult(status="ok")

    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for bi, idx in enumerate(batches):
            u = net(Tensor(samples.inputs[idx]))
            loss = evaluator(u, "train", idx, states[bi])
            lv = float(loss.data)
            if not math.isfinite(lv):
                result.status = "diverged"
                result.wall_clock = time.perf_counter() - t0
                return result
            clear_grads(params)
            loss.backward()
            adam_step(params, adam)
            total += lv * len(idx)
            count += len(idx)
        result.train_loss.append(total / count)
        if epoch % config.eval_every == 0 or epoch == config.epochs - 1:
            current = eval_metric(net, evaluator, val_split, config.metric)
        result.val_metric.append(current)
        result.epochs_run = epoch + 1

    result.wall_clock = time.perf_counter() - t0
    return result


def save_params(net, dir_path):
    """Snapshot every parameter to its own tensor file, in registration
    order (the order is part of the format — reload into the same
    architecture built from the same choices)."""
    out = Path(dir_path)
    out.mkdir(parents=True, exist_ok=True)
    params = net.parameters()
    for i, p in enumerate(params):
        save_tensor(out / f"p{i:04d}.ptns", p.data)
    return len(params)


def load_params(net, dir_path):
    params = net.parameters()
    src = Path(dir_path)
    for i, p in enumerate(params):
        arr = load_tensor(src / f"p{i:04d}.ptns")
        if arr.shape != p.data.shape:
            raise ValueError(f"parameter {i}: saved shape {arr.shape} != "
                             f"model shape {p.data.shape}")
        p.data = arr
    extra = src / f"p{len(params):04d}.ptns"
    if extra.exists():
        raise ValueError(f"weight directory has more tensors than the model "
                         f"has parameters ({extra.name} is unexpected)")
    return len(params)


def write_curves(path, result):
    """Loss/metric curves as CSV: one row per epoch run, fixed header."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_FIELDS)
        for e, (tl, vm) in enumerate(zip(result.train_loss, result.val_metric)):
            w.writerow([e, f"{tl:.10g}", f"{vm:.10g}"])
