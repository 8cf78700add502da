"""Heat annulus, start to finish: search a loss genome, then train
hard-constraint, vanilla soft-constraint, and searched-genome models
and compare their test errors.

The default run is trimmed for a coffee-break (~2 min).  `--full`
reproduces the calibration behind the release gates exactly: stage-1
search with root seed 20260819 (budget 16, 60-epoch trials), then three
2000-epoch trainings at lr 5e-4 with net seed 42.  The frozen searched
genome in the acceptance suite is this search's winner.

Run:  python3 demos/heat_annulus_end_to_end.py [--full]
"""

import argparse
import tempfile
import time

import numpy as np

from picnn.config import config_from_dict
from picnn.datasets import make_heat_annulus
from picnn.losses import LossEvaluator, LossGenome, vanilla_genome
from picnn.networks import build_network, default_choices
from picnn.pipeline import run_stage1
from picnn.training import TrainConfig, eval_metric, train

ROOT_SEED = 20260819


def search_genome(problem, full, out_dir):
    cfg = config_from_dict({
        "problem": "heat_annulus", "seed": ROOT_SEED, "out_dir": out_dir,
        "stage1": {"budget": 16 if full else 6,
                   "epochs": 60 if full else 30,
                   "n_seed": 6 if full else 3},
    })
    t0 = time.perf_counter()
    res = run_stage1(problem, cfg, out_dir)
    print(f"stage-1 search: {len(res.trials)} trials "
          f"({res.n_stopped} stopped early) in {time.perf_counter() - t0:.0f}s")
    print(f"  best panel error {res.best_error:.4f}")
    print(f"  best genome {res.best_genome}")
    return res.best_genome


def train_and_score(problem, genome, label, epochs, lr):
    ev = LossEvaluator(genome, problem)
    net = build_network("cnn_stack", default_choices("cnn_stack"), 1,
                        np.random.default_rng(42),
                        grid_shape=problem.grid_shape)
    t0 = time.perf_counter()
    res = train(net, ev, TrainConfig(epochs=epochs, lr=lr, eval_every=20))
    test = eval_metric(net, ev, "test")
    print(f"  {label:13s} val {res.final_val:.4f}  test {test:.4f}  "
          f"({res.status}, {time.perf_counter() - t0:.0f}s)")
    return test


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full", action="store_true",
                    help="reproduce the calibration run (about 10 min)")
    args = ap.parse_args()
    epochs = 2000 if args.full else 300
    lr = 5e-4

    problem = make_heat_annulus()
    print(f"annulus grid {problem.grid_shape}; train inner temperatures "
          "T_in = 1 and 7, test at 2..6\n")

    with tempfile.TemporaryDirectory() as tmp:
        searched = search_genome(problem, args.full, tmp)

    print(f"\ntraining three losses for {epochs} epochs at lr {lr}:")
    hard = train_and_score(problem, LossGenome(constraint="hard"),
                           "hard", epochs, lr)
    soft = train_and_score(problem, vanilla_genome(), "vanilla soft",
                           epochs, lr)
    best = train_and_score(problem, searched, "searched", epochs, lr)

    print(f"\nsearched/soft error ratio: {best / soft:.2f} "
          f"(release gate asks <= 0.50 at full scale)")
    print(f"hard-constraint test error: {hard:.4f} "
          f"(release gate asks < 0.10 at full scale)")


if __name__ == "__main__":
    main()
