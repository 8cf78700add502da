"""Loss-function search: GP-suggested trials with median early stopping.

The trainer is injected as a callable so the search logic is independent
of how a genome is scored: `train_fn(genome, should_stop) -> trace`,
where `trace` is the per-epoch validation metric and `should_stop(epoch,
trace_so_far)` is consulted after every epoch. Trials run on a thread
pool; the surrogate and the trial ledger are only touched under a lock,
and suggestions are generated one at a time. Results are reproducible
bit-for-bit at workers=1.
"""

from __future__ import annotations

import csv
import threading
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, fields

import numpy as np

from .bayesopt import (
    GpSurrogate, TrialRecord, bo_suggest, encode_genome, median_stop_check,
)
from .losses import LossGenome

__all__ = ["LossSearchError", "LossSearchResult", "run_loss_search",
           "write_trial_ledger"]

_GENOME_FIELDS = [f.name for f in fields(LossGenome)]


class LossSearchError(RuntimeError):
    """Raised when no trial produces a usable validation error."""


@dataclass
class LossSearchResult:
    best_genome: LossGenome
    best_error: float
    trials: list
    n_fallback: int = 0
    n_stopped: int = 0


def write_trial_ledger(path, trials):
    """One CSV row per trial: genome fields, epochs run, outcome."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", *_GENOME_FIELDS, "epochs_run", "final_error",
                    "stopped"])
        for i, t in enumerate(trials):
            w.writerow([
                i, *[getattr(t.genome, n) for n in _GENOME_FIELDS],
                len(t.trace),
                "" if t.final_error is None else repr(t.final_error),
                int(t.status == "stopped"),
            ])


def run_loss_search(train_fn, candidates, budget, epochs, rng,
                    n_seed=8, workers=1, ledger_path=None):
    """Evaluate `budget` genomes from `candidates` and return the best.

    The first `n_seed` picks are uniform random; the rest maximize
    expected improvement under a GP fit to every error observed so far
    (early-stopped trials contribute their best metric reached). Raises
    LossSearchError if no trial completes.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > len(candidates):
        raise ValueError("budget exceeds the candidate count")

    encoded = np.stack([encode_genome(g) for g in candidates])
    surrogate = GpSurrogate()
    lock = threading.Lock()
    trials = []
    tried = set()
    n_fallback = 0

    def run_one(idx):
        trial = TrialRecord(genome=candidates[idx])
        with lock:
            trials.append(trial)
        stopped = False

        def should_stop(epoch, trace_so_far):
            nonlocal stopped
            trial.trace = list(trace_so_far)
            with lock:
                done = [t for t in trials if t.status == "completed"]
            stopped = median_stop_check(trial, done, epoch, epochs)
            return stopped

        try:
            trial.trace = list(train_fn(candidates[idx], should_stop))
        except Exception:
            trial.stop()
            return idx, trial
        if stopped or len(trial.trace) < epochs:
            trial.stop()
        else:
            trial.finish()
        return idx, trial

    n_random = min(n_seed, budget)
    first = rng.choice(len(candidates), size=n_random, replace=False)
    submitted = 0

    with ThreadPoolExecutor(max_workers=workers) as pool:
        inflight = set()
        for i in first:
            tried.add(int(i))
            inflight.add(pool.submit(run_one, int(i)))
            submitted += 1
        while inflight:
            done, inflight = wait(inflight, return_when=FIRST_COMPLETED)
            for fut in done:
                idx, trial = fut.result()
                with lock:
                    if trial.trace:
                        surrogate.add(encoded[idx], trial.best_so_far())
            while submitted < budget and len(inflight) < workers:
                with lock:
                    nxt, info = bo_suggest(surrogate, candidates, encoded,
                                           tried, rng)
                    tried.add(nxt)
                    if info["fallback"]:
                        n_fallback += 1
                inflight.add(pool.submit(run_one, nxt))
                submitted += 1

    completed = [t for t in trials if t.status == "completed"]
    if not completed:
        raise LossSearchError(
            f"no trial completed: {len(trials)} run, "
            f"{sum(t.status == 'stopped' for t in trials)} stopped or failed")
    best = min(completed, key=lambda t: t.final_error)

    if ledger_path is not None:
        write_trial_ledger(ledger_path, trials)
    return LossSearchResult(
        best_genome=best.genome, best_error=best.final_error, trials=trials,
        n_fallback=n_fallback,
        n_stopped=sum(t.status == "stopped" for t in trials))
