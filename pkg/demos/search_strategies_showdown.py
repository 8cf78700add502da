"""The three architecture-search strategies on one small problem.

Multi-trial RL trains every sampled architecture from scratch; ENAS
shares one supernet's weights across samples; DARTS relaxes the choice
into a softmax mixture and never samples at all.  This runs all three
on a small heat annulus and prints what each picked.

Run:  python3 demos/search_strategies_showdown.py
"""

import tempfile
import time

from picnn.config import config_from_dict
from picnn.datasets import make_heat_annulus
from picnn.losses import vanilla_genome
from picnn.pipeline import run_stage2


def main():
    problem = make_heat_annulus(n_rho=16, n_theta=32)
    genome = vanilla_genome()
    print(f"problem: {problem.name} at {problem.grid_shape}, "
          f"genome: vanilla soft constraint\n")

    for strategy, budget in (("rl", 6), ("enas", 40), ("darts", 40)):
        cfg = config_from_dict({
            "problem": "heat_annulus",
            "problem_kwargs": {"n_rho": 16, "n_theta": 32},
            "seed": 3, "space": "cnn_stack",
            "stage2": {"strategy": strategy, "budget": budget, "epochs": 3},
        })
        with tempfile.TemporaryDirectory() as tmp:
            t0 = time.perf_counter()
            choices = run_stage2(problem, genome, cfg, tmp)
            wall = time.perf_counter() - t0
        print(f"{strategy:6s} ({budget:2d} {'trials' if strategy == 'rl' else 'steps'}, "
              f"{wall:4.0f}s) -> " +
              ", ".join(f"{k}={v}" for k, v in sorted(choices.items())))


if __name__ == "__main__":
    main()
