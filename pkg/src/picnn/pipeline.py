"""Two-stage orchestration: loss search, then architecture search.

Everything an experiment produces lands under one run directory: a
reproducibility manifest (config + derived seeds + config hash), per-stage
trial ledgers, the frozen stage-1 genome, training curves of the final
retrain, and a JSON report.  All randomness is derived from the config's
root seed through fixed per-component spawn keys, so a rerun from the
manifest is bit-for-bit identical in single-threaded mode.

The test split is sealed off behind a guard for the whole search; only the
final evaluation unlocks it.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .archsearch import (
    build_supernet, darts_search, enas_search, multi_trial_search,
    random_subnetworks,
)
from .bayesopt import enumerate_genomes
from .config import (
    ExperimentConfig, config_from_dict, config_hash, config_to_dict,
    write_genome,
)
from .controller import Controller
from .datasets import grouped_batches, make_problem
from .losses import LossEvaluator, LossGenome
from .losssearch import run_loss_search
from .networks import build_network, default_choices, search_space
from .optim import AdamState, adam_step, clear_grads
from .tensor import Tensor
from .training import (
    METRICS, TrainConfig, eval_metric, predict, train, write_curves,
)

__all__ = [
    "TestSplitAccessError", "PipelineDiverged", "TestSplitGuard", "component_rng",
    "two_stage_pipeline", "rerun_from_manifest", "compare_spaces",
    "report_emit", "load_report", "FORMAT_VERSION",
]

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

# spawn keys of the per-component rng streams, all derived from the root seed
COMPONENTS = ("data", "stage1_search", "stage1_nets", "stage2_search",
              "stage2_nets", "final_net")


class TestSplitAccessError(RuntimeError):
    """The search phase touched the test split."""


class PipelineDiverged(RuntimeError):
    """The final retrain hit a non-finite loss."""


class _GuardedSplits:
    def __init__(self, splits, guard):
        self._splits = splits
        self._guard = guard

    def __getitem__(self, split):
        self._guard.check(split)
        return self._splits[split]

    def __contains__(self, split):
        return split in self._splits


class TestSplitGuard:
    """Problem proxy whose test split raises until explicitly unlocked."""

    def __init__(self, problem):
        self._problem = problem
        self._unlocked = False

    def unlock_test(self):
        self._unlocked = True

    def check(self, split):
        if split == "test" and not self._unlocked:
            raise TestSplitAccessError(
                "test split requested during the search phase")

    @property
    def splits(self):
        return _GuardedSplits(self._problem.splits, self)

    def bc_for(self, split, indices):
        self.check(split)
        return self._problem.bc_for(split, indices)

    def residual(self, u, split, indices, family, ghost=False):
        self.check(split)
        return self._problem.residual(u, split, indices, family, ghost=ghost)

    def __getattr__(self, name):
        return getattr(self._problem, name)


def component_rng(root_seed, component):
    """Generator for one named component, derived from the root seed."""
    idx = COMPONENTS.index(component)
    return np.random.default_rng(np.random.SeedSequence(root_seed,
                                                        spawn_key=(idx,)))


def component_seed(root_seed, component):
    idx = COMPONENTS.index(component)
    seq = np.random.SeedSequence(root_seed, spawn_key=(idx,))
    return int(seq.generate_state(1)[0])


def _build_problem(cfg):
    kwargs = dict(cfg.problem_kwargs)
    if cfg.problem != "heat_annulus" and "seed" not in kwargs:
        kwargs["seed"] = component_seed(cfg.seed, "data")
    return make_problem(cfg.problem, **kwargs)


# ---------------------------------------------------------------- stage 1


def _stage1_structures(cfg):
    if cfg.stage1.panel:
        return random_subnetworks(cfg.space, n=cfg.stage1.panel)
    return [default_choices(cfg.space)]


def _make_stage1_trainer(problem, cfg):
    """Trainer handed to the loss search: trains the fixed panel of
    structures in lockstep under a candidate genome and reports the
    panel-average validation error per epoch."""
    structures = _stage1_structures(cfg)
    s1 = cfg.stage1
    cin = problem.splits["train"].inputs.shape[1]
    net_seed = component_seed(cfg.seed, "stage1_nets")
    batches = grouped_batches(problem, "train", s1.batch_size)
    inputs = problem.splits["train"].inputs

    def train_fn(genome, should_stop):
        evaluator = LossEvaluator(genome, problem)
        # identical panel initialization for every candidate genome
        nets = [build_network(cfg.space, ch, cin,
                              np.random.default_rng(net_seed + i))
                for i, ch in enumerate(structures)]
        adams = [AdamState(net.parameters(), lr=s1.lr) for net in nets]
        states = [[evaluator.new_state() for _ in batches] for _ in nets]
        trace = []
        for epoch in range(s1.epochs):
            for net, adam, st in zip(nets, adams, states):
                params = net.parameters()
                for bi, idx in enumerate(batches):
                    loss = evaluator(net(Tensor(inputs[idx])), "train", idx,
                                     st[bi])
                    if not math.isfinite(float(loss.data)):
                        raise RuntimeError(f"stage-1 trial diverged at epoch "
                                           f"{epoch}")
                    clear_grads(params)
                    loss.backward()
                    adam_step(params, adam)
            err = float(np.mean([eval_metric(net, evaluator, "val", cfg.metric)
                                 for net in nets]))
            trace.append(err)
            if should_stop(epoch, trace):
                break
        return trace

    return train_fn


def run_stage1(problem, cfg, out_dir=None):
    """Loss-function search over the (optionally restricted) genome space."""
    s1 = cfg.stage1
    restrict = {}
    for key in ("constraints", "families", "unaries", "weight_ops"):
        vals = getattr(s1, key)
        if vals:
            restrict[key] = tuple(vals)
    candidates = enumerate_genomes(**restrict)
    rng = component_rng(cfg.seed, "stage1_search")
    ledger = str(Path(out_dir) / "stage1_trials.csv") if out_dir else None
    result = run_loss_search(_make_stage1_trainer(problem, cfg), candidates,
                             budget=s1.budget, epochs=s1.epochs, rng=rng,
                             n_seed=min(s1.n_seed, s1.budget),
                             workers=s1.workers, ledger_path=ledger)
    if out_dir:
        write_genome(result.best_genome, Path(out_dir) / "best_genome.json")
    return result


# ---------------------------------------------------------------- stage 2


def _metric_closure(problem, genome, cfg, forward):
    """Validation metric for a supernet-style forward callable."""
    evaluator = LossEvaluator(genome, problem)

    class _Net:
        def __call__(self, x):
            return forward(x)

    def value():
        pred = predict(_Net(), evaluator, "val")
        truth = problem.splits["val"].truths
        return float(METRICS[cfg.metric](pred, truth))

    return value


def run_stage2(problem, genome, cfg, out_dir=None):
    """Architecture search under a frozen loss genome; returns a choices
    dict plus a searchable-record list for the ledger."""
    s2 = cfg.stage2
    space = search_space(cfg.space)
    evaluator = LossEvaluator(genome, problem)
    cin = problem.splits["train"].inputs.shape[1]
    rng = component_rng(cfg.seed, "stage2_search")
    net_rng_seed = component_seed(cfg.seed, "stage2_nets")
    inputs = problem.splits["train"].inputs
    batches = grouped_batches(problem, "train", s2.batch_size)
    ledger = (str(Path(out_dir) / f"stage2_{s2.strategy}.csv")
              if out_dir else None)

    if s2.strategy == "rl":
        tc = TrainConfig(epochs=s2.epochs, batch_size=s2.batch_size, lr=s2.lr,
                         metric=cfg.metric,
                         eval_every=max(1, s2.epochs // 10))

        def train_fn(choices):
            net = build_network(cfg.space, choices, cin,
                                np.random.default_rng(net_rng_seed))
            res = train(net, evaluator, tc)
            if res.status != "ok" or res.final_val is None:
                return float("inf")
            return res.final_val

        result = multi_trial_search(space, train_fn, budget=s2.budget,
                                    rng=rng, ledger_path=ledger)
        return result.best_choices

    supernet = build_supernet(cfg.space, np.random.default_rng(net_rng_seed),
                              cin)
    train_iter = itertools.cycle(batches)

    if s2.strategy == "enas":
        controller = Controller(supernet.space, rng)

        def loss_train(choices):
            idx = next(train_iter)
            u = supernet.forward_discrete(Tensor(inputs[idx]), choices)
            return evaluator(u, "train", idx, evaluator.new_state())

        def eval_error(choices):
            forward = lambda x: supernet.forward_discrete(x, choices)
            return _metric_closure(problem, genome, cfg, forward)()

        best, _, _ = enas_search(supernet, controller, loss_train, eval_error,
                                 steps=s2.budget, rng=rng, lr_w=s2.lr,
                                 ledger_path=ledger)
        return _lift_choices(best, cfg.space)

    # darts
    val_batches = grouped_batches(problem, "val", s2.batch_size)
    val_iter = itertools.cycle(val_batches)
    val_inputs = problem.splits["val"].inputs

    def loss_train(forward):
        idx = next(train_iter)
        u = forward(Tensor(inputs[idx]))
        return evaluator(u, "train", idx, evaluator.new_state())

    def loss_val(forward):
        idx = next(val_iter)
        u = forward(Tensor(val_inputs[idx]))
        return evaluator(u, "val", idx, evaluator.new_state())

    best, _, _ = darts_search(supernet, loss_train, loss_val, steps=s2.budget,
                              lr_w=s2.lr, ledger_path=ledger)
    return _lift_choices(best, cfg.space)


def _lift_choices(choices, kind):
    """Weight-sharing searches run on the restricted supernet space; the
    choices they decode are valid in the full space too (candidate lists
    only ever shrink), so revalidate against it."""
    search_space(kind).validate(choices)
    return choices


# ----------------------------------------------------------------- final


def run_final(problem, genome, choices, cfg, out_dir=None):
    evaluator = LossEvaluator(genome, problem)
    cin = problem.splits["train"].inputs.shape[1]
    net = build_network(cfg.space, choices, cin,
                        component_rng(cfg.seed, "final_net"),
                        grid_shape=problem.grid_shape)
    tc = TrainConfig(epochs=cfg.train.epochs, batch_size=cfg.train.batch_size,
                     lr=cfg.train.lr, metric=cfg.metric,
                     eval_every=cfg.train.eval_every)
    result = train(net, evaluator, tc)
    if out_dir:
        write_curves(Path(out_dir) / "curves.csv", result)
    return net, result, evaluator


# ---------------------------------------------------------------- report


def report_emit(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_report(path):
    with open(path) as fh:
        return json.load(fh)


def write_manifest(cfg, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "version": __version__,
        "config": config_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "root_seed": cfg.seed,
        "component_seeds": {c: component_seed(cfg.seed, c)
                            for c in COMPONENTS},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# -------------------------------------------------------------- pipeline


def two_stage_pipeline(cfg, genome=None):
    """Loss search, architecture search, final retrain, test evaluation.

    Passing `genome` skips stage 1 (used by the comparison harness and the
    search-arch CLI path).  Returns the report dict; artifacts (manifest,
    ledgers, genome, curves, report) are written under cfg.out_dir as each
    stage completes, so a failed run keeps everything produced so far.
    """
    t0 = time.perf_counter()
    out_dir = Path(cfg.out_dir)
    write_manifest(cfg, out_dir)
    problem = TestSplitGuard(_build_problem(cfg))

    stage1_summary = None
    if genome is None:
        s1 = run_stage1(problem, cfg, out_dir)
        genome = s1.best_genome
        stage1_summary = {
            "best_error": s1.best_error,
            "n_trials": len(s1.trials),
            "n_stopped": s1.n_stopped,
            "n_fallback": s1.n_fallback,
        }
        logger.info("stage 1 done: %s (val %.4g)", genome, s1.best_error)

    choices = run_stage2(problem, genome, cfg, out_dir)
    logger.info("stage 2 done: %s", choices)

    net, result, evaluator = run_final(problem, genome, choices, cfg, out_dir)
    if result.status != "ok":
        raise PipelineDiverged("final retrain diverged")

    problem.unlock_test()
    test_metric = eval_metric(net, evaluator, "test", cfg.metric)

    report = {
        "format_version": FORMAT_VERSION,
        "version": __version__,
        "problem": cfg.problem,
        "space": cfg.space,
        "strategy": cfg.stage2.strategy,
        "genome": asdict(genome),
        "architecture": choices,
        "stage1": stage1_summary,
        "metric": cfg.metric,
        "metrics": {"val": result.final_val, "test": test_metric},
        "train_loss": result.train_loss,
        "epochs_run": result.epochs_run,
        "wall_clock": time.perf_counter() - t0,
        "config_hash": config_hash(cfg),
        "root_seed": cfg.seed,
    }
    report_emit(report, out_dir)
    return report


def rerun_from_manifest(manifest_path, out_dir=None):
    """Reproduce a run from its manifest; same seeds, same everything."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    cfg = config_from_dict(manifest["config"])
    if out_dir is not None:
        cfg = config_from_dict({**config_to_dict(cfg), "out_dir": str(out_dir)})
    return two_stage_pipeline(cfg)


def compare_spaces(cfg, genome=None, spaces=("unet_entire", "unet_cell")):
    """Run stage 2 + final retrain per space under one frozen genome and
    emit a comparison CSV (space, val, test rows)."""
    genome = genome if genome is not None else LossGenome()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for space in spaces:
        sub = config_to_dict(cfg)
        sub["space"] = space
        sub["out_dir"] = str(out_dir / space)
        report = two_stage_pipeline(config_from_dict(sub), genome=genome)
        rows.append({"space": space,
                     "val_metric": report["metrics"]["val"],
                     "test_metric": report["metrics"]["test"]})
    with open(out_dir / "comparison.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["space", "val_metric",
                                           "test_metric"])
        w.writeheader()
        w.writerows(rows)
    return rows
