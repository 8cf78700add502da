"""What a loss genome is, and what each switch does to the number.

A genome assembles the physics loss: constraint handling, the stencil
family behind the residue matrix, a pointwise unary, residue weighting,
gradient enhancement, and the boundary penalty.  This demo scores one
fixed random network output under a series of genomes so the effect of
each switch is visible in isolation.

Run:  python3 demos/loss_genome_playground.py
"""

import numpy as np

from picnn.datasets import make_poisson_source
from picnn.losses import LossEvaluator, LossGenome, vanilla_genome
from picnn.tensor import Tensor


def score(problem, genome, u):
    ev = LossEvaluator(genome, problem)
    return float(ev(u, "train", range(u.shape[0]), ev.new_state()).data)


def main():
    problem = make_poisson_source(n=16, n_modes=8, n_train=4, n_val=2,
                                  n_test=2, seed=1)
    u = Tensor(np.random.default_rng(5).normal(size=(4, 1, 16, 16)))

    base = vanilla_genome()
    print("vanilla genome:", base)
    print(f"  loss = {score(problem, base, u):.4f} "
          "(residue MSE + boundary MSE, nothing else)\n")

    variants = [
        ("hard constraint (boundary stitched on, penalty moot)",
         LossGenome(constraint="hard")),
        ("combined: hard stitch + residual on the stitched field",
         LossGenome(constraint="combined")),
        ("central4 residue", LossGenome(kernel_family="central4")),
        ("sobel5 residue", LossGenome(kernel_family="sobel5")),
        ("abs instead of square", LossGenome(unary="abs")),
        ("top-1% residue focus", LossGenome(weight_op="topn")),
        ("min-max normalized weights", LossGenome(weight_op="normalize")),
        ("self-adaptive pointwise weights",
         LossGenome(weight_op="pointwise_grad", rho=0.1)),
        ("gradient-enhanced (small extra term)",
         LossGenome(gradient_enhance=True, lambda_g=0.01)),
        ("boundary penalty weighted 10x", LossGenome(lambda_b=10.0)),
    ]
    for label, genome in variants:
        print(f"{score(problem, genome, u):12.4f}  {label}")

    print("\nSame genome, same output, same state -> same number:")
    a = score(problem, base, u)
    b = score(problem, base, u)
    print(f"  {a:.12f} == {b:.12f}: {a == b}")


if __name__ == "__main__":
    main()
