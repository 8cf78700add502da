import time
import numpy as np
from picnn.datasets import make_heat_annulus
from picnn.losses import LossEvaluator, LossGenome, vanilla_genome
from picnn.networks import build_network, default_choices
from picnn.training import TrainConfig, eval_metric, train

t0 = time.perf_counter()
SEARCHED = LossGenome(constraint="combined", kernel_family="sobel5",
                      unary="square", weight_op="topn", add_ones=True)

def run(genome, lr):
    problem = make_heat_annulus()
    ev = LossEvaluator(genome, problem)
    net = build_network("cnn_stack", default_choices("cnn_stack"), 1,
                        np.random.default_rng(42), grid_shape=problem.grid_shape)
    res = train(net, ev, TrainConfig(epochs=2000, lr=lr, eval_every=20))
    return res, eval_metric(net, ev, "test")

for label, genome in (("hard", LossGenome(constraint="hard")),
                      ("vanilla_soft", vanilla_genome()),
                      ("searched", SEARCHED)):
    for lr in (3e-4, 5e-4):
        res, test = run(genome, lr)
        print(f"[{time.perf_counter()-t0:.0f}s] {label} lr={lr}: "
              f"val={res.final_val:.6g} test={test:.6g}", flush=True)
