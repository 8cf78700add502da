"""Build each PDE dataset, describe its splits, and sanity-check the
reference solutions that back the train/val/test truths.

The Poisson and Darcy references come from the conjugate-gradient
solvers; the heat annulus has a closed-form radial profile.  The demo
prints one residual-style check per problem so the numbers mean
something.

Run:  python3 demos/dataset_gallery.py
"""

import numpy as np

from picnn.datasets import make_darcy_flow, make_heat_annulus, make_poisson_source
from picnn.linsolve import darcy_boundary_flux
from picnn.randomfields import GrfSpec, kl_expansion, sample_grf, theoretical_variance


def describe(problem):
    print(f"== {problem.name} ==")
    print(f"  grid {problem.grid_shape}, h = "
          f"({problem.h[0]:.4f}, {problem.h[1]:.4f})")
    for split in ("train", "val", "test"):
        s = problem.splits[split]
        print(f"  {split:5s} inputs {s.inputs.shape}  truths {s.truths.shape}")


def heat():
    p = make_heat_annulus()
    describe(p)
    # the truth of the first test sample is the exact log-radial profile
    truth = p.splits["test"].truths[0, 0]
    print(f"  inner-ring value {truth[0].mean():.4f} (boundary temperature), "
          f"outer-ring value {truth[-1].mean():.4f}")


def poisson():
    p = make_poisson_source()
    describe(p)
    # the KL machinery behind the source terms
    basis = kl_expansion(30, 30, GrfSpec(50.0, 0.5, 10))
    fields = sample_grf(basis, np.random.default_rng(0), 4096)
    emp = fields.var(axis=0).mean()
    theo = theoretical_variance(basis).mean()
    print(f"  source GRF variance: empirical {emp:.2f} vs theory {theo:.2f}")
    f = p.sources["train"][0]
    print(f"  first train source: min {f.min():.2f}, max {f.max():.2f}")


def darcy():
    p = make_darcy_flow()
    describe(p)
    u = p.splits["train"].truths[0, 0]
    K = p.perms["train"][0]
    fin, fout = darcy_boundary_flux(u, K, p.h)
    print(f"  flux balance on first train truth: in {fin:.6f}, out {fout:.6f}, "
          f"|diff| {abs(fin - fout):.2e}")


def main():
    heat()
    print()
    poisson()
    print()
    darcy()


if __name__ == "__main__":
    main()
