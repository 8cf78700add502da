"""Calibration: heat hard-constraint lr sweep, then full poisson trace.

Everything here mirrors the acceptance protocol bit for bit (same
factories, same net seeds, same TrainConfig fields) so the numbers can
be frozen into the acceptance suite.
"""
import json
import time

import numpy as np

from picnn.datasets import make_heat_annulus, make_poisson_source
from picnn.losses import LossEvaluator, LossGenome, vanilla_genome
from picnn.networks import build_network, default_choices
from picnn.training import TrainConfig, eval_metric, train

t0 = time.perf_counter()


def stamp(msg):
    print(f"[{time.perf_counter() - t0:.0f}s] {msg}", flush=True)


SEARCHED = LossGenome(constraint="combined", kernel_family="sobel5",
                      unary="square", weight_op="topn", add_ones=True)


def run_heat(genome, lr, epochs=2000):
    problem = make_heat_annulus()
    ev = LossEvaluator(genome, problem)
    net = build_network("cnn_stack", default_choices("cnn_stack"), 1,
                        np.random.default_rng(42), grid_shape=problem.grid_shape)
    res = train(net, ev, TrainConfig(epochs=epochs, lr=lr, eval_every=20))
    return res, eval_metric(net, ev, "test")


for lr in (5e-4, 2e-3, 3e-3):
    res, test = run_heat(LossGenome(constraint="hard"), lr)
    stamp(f"hard lr={lr}: status={res.status} val={res.final_val:.6g} test={test:.6g}")

# second leg re-run at whichever lr the sweep picks (read the log, then
# these two lines confirm the soft/searched pair at that lr)
BEST_LR = float(json.load(open("/root/pkg/calib/best_lr.json"))["lr"]) if False else None
for label, genome in (("vanilla_soft", vanilla_genome()), ("searched", SEARCHED)):
    for lr in (2e-3, 3e-3):
        res, test = run_heat(genome, lr)
        stamp(f"{label} lr={lr}: status={res.status} val={res.final_val:.6g} test={test:.6g}")

stamp("heat sweep done; starting poisson 2000-epoch trace")

problem = make_poisson_source()
ev = LossEvaluator(vanilla_genome(), problem)
net = build_network("unet_entire", default_choices("unet_entire"), 1,
                    np.random.default_rng(0), grid_shape=problem.grid_shape)
res = train(net, ev, TrainConfig(epochs=2000, lr=1e-3, eval_every=10))
stamp(f"poisson: status={res.status} final_val={res.final_val:.6g} "
      f"test={eval_metric(net, ev, 'test'):.6g} wall={res.wall_clock:.0f}s")
vals = res.val_metric
evaluated = [(i, v) for i, v in enumerate(vals)
             if i % 10 == 0 or i == len(vals) - 1]
for i, v in evaluated:
    print(f"epoch {i} val {v:.6g}", flush=True)
hits = [i for i, v in evaluated if v < 0.05]
stamp(f"first epoch with val < 0.05: {hits[0] if hits else 'NEVER'}")
