"""The three benchmark problems: annulus conduction, Poisson, Darcy flow.

Each builder returns a problem object with a shared duck-typed surface:

  name           short identifier
  grid_shape     (H, W)
  h              (hy, hx) spacing
  splits         dict split -> Samples(inputs [N,C,H,W], truths [N,1,H,W])
  bc_for         (split, indices) -> one BoundarySpec for the whole batch
  residual       (u, split, indices, family, ghost) -> ResidualField

Truth fields come from closed forms or the sparse reference solvers and
are used only for evaluation — training sees inputs, boundary conditions,
and PDE residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import BoundarySpec, dirichlet, neumann, periodic
from .linsolve import solve_darcy_flow, solve_poisson_dirichlet
from .randomfields import GrfSpec, kl_expansion, sample_grf
from .residuals import darcy_residual, laplacian_residual, polar_laplacian_residual

__all__ = ["Samples", "HeatAnnulus", "PoissonSource", "DarcyFlow",
           "make_heat_annulus", "make_poisson_source", "make_darcy_flow",
           "make_problem", "grouped_batches"]

SPLITS = ("train", "val", "test")


@dataclass
class Samples:
    inputs: np.ndarray    # [N, C_in, H, W]
    truths: np.ndarray    # [N, 1, H, W]

    def __len__(self):
        return self.inputs.shape[0]


def _check_split(split):
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")


def grouped_batches(problem, split, batch_size):
    """Consecutive index batches that never mix boundary-condition groups.

    Problems with per-sample boundary data publish `batch_keys`; a batch
    ends at a key change or at `batch_size` (0 means unbounded).
    """
    n = len(problem.splits[split])
    keys = getattr(problem, "batch_keys", None)
    keys = np.asarray(keys(split)) if keys is not None else np.zeros(n)
    size = n if batch_size == 0 else batch_size
    batches, start = [], 0
    for i in range(1, n + 1):
        if i == n or keys[i] != keys[start] or i - start == size:
            batches.append(list(range(start, i)))
            start = i
    return batches


@dataclass
class HeatAnnulus:
    """Steady conduction on an annulus, solved in polar coordinates.

    Rows run over radius (inner boundary first), columns over the angle.
    The inner rim is held at a per-sample constant, the outer rim at zero;
    the exact solution is the radial log profile, so truth is closed-form.
    The network input is the linear radial interpolation between the rims.
    """
    name: str
    grid_shape: tuple
    h: tuple
    rho: np.ndarray
    splits: dict
    tin: dict             # split -> array of inner temperatures

    def bc_for(self, split, indices):
        _check_split(split)
        vals = self.tin[split][list(indices)]
        if np.unique(vals).size != 1:
            raise ValueError("batch mixes inner temperatures; use batches with one T_in")
        return BoundarySpec(dirichlet(float(vals[0])), dirichlet(0.0),
                            periodic(), periodic())

    def batch_keys(self, split):
        _check_split(split)
        return self.tin[split]

    def residual(self, u, split, indices, family, ghost=False):
        bc = self.bc_for(split, indices)
        return polar_laplacian_residual(u, self.rho, self.h, family,
                                        bc=bc, ghost=ghost)


@dataclass
class PoissonSource:
    """lap(u) + f = 0 on the unit square, u = g on the border, f from a GRF."""
    name: str
    grid_shape: tuple
    h: tuple
    g: float
    splits: dict
    sources: dict         # split -> [N, H, W]
    _bc: BoundarySpec = field(init=False)

    def __post_init__(self):
        self._bc = BoundarySpec(dirichlet(self.g), dirichlet(self.g),
                                dirichlet(self.g), dirichlet(self.g))

    def bc_for(self, split, indices):
        _check_split(split)
        return self._bc

    def residual(self, u, split, indices, family, ghost=False):
        _check_split(split)
        f = self.sources[split][list(indices)][:, None]
        # residual = lap(u) + f  <=>  lap(u) - (-f)
        return laplacian_residual(u, self.h, family, source=-f,
                                  bc=self._bc, ghost=ghost)


@dataclass
class DarcyFlow:
    """-div(K grad u) = 0: unit head drop left to right, sealed rows."""
    name: str
    grid_shape: tuple
    h: tuple
    splits: dict
    perms: dict           # split -> [N, H, W]
    _bc: BoundarySpec = field(init=False)

    def __post_init__(self):
        self._bc = BoundarySpec(neumann(0.0), neumann(0.0),
                                dirichlet(1.0), dirichlet(0.0))

    def bc_for(self, split, indices):
        _check_split(split)
        return self._bc

    def residual(self, u, split, indices, family, ghost=False):
        _check_split(split)
        K = self.perms[split][list(indices)][:, None]
        return darcy_residual(u, K, self.h, family, bc=self._bc, ghost=ghost)


def make_heat_annulus(n_rho=32, n_theta=64, r_in=0.5, r_out=1.0,
                      train_tin=(1.0, 7.0), test_tin=(2.0, 3.0, 4.0, 5.0, 6.0)):
    """Annulus conduction; validation reuses the two training temperatures."""
    rho = np.linspace(r_in, r_out, n_rho)
    h_rho = rho[1] - rho[0]
    h_theta = 2.0 * np.pi / n_theta

    def build(tins):
        tins = np.asarray(tins, dtype=np.float64)
        lin = (r_out - rho) / (r_out - r_in)                  # 1 at inner rim, 0 outer
        log_profile = np.log(r_out / rho) / np.log(r_out / r_in)
        inputs = tins[:, None, None, None] * np.broadcast_to(
            lin[:, None], (tins.size, 1, n_rho, n_theta))
        truths = tins[:, None, None, None] * np.broadcast_to(
            log_profile[:, None], (tins.size, 1, n_rho, n_theta))
        return Samples(np.ascontiguousarray(inputs), np.ascontiguousarray(truths)), tins

    train, tin_train = build(train_tin)
    val, tin_val = build(train_tin)
    test, tin_test = build(test_tin)
    return HeatAnnulus(
        name="heat_annulus",
        grid_shape=(n_rho, n_theta),
        h=(h_rho, h_theta),
        rho=rho,
        splits={"train": train, "val": val, "test": test},
        tin={"train": tin_train, "val": tin_val, "test": tin_test},
    )


def make_poisson_source(n=30, n_modes=10, sigma0=50.0, length_scale=0.5,
                        n_train=48, n_val=16, n_test=16, g=10.0, seed=0):
    """Poisson with GRF sources; truths from the sparse reference solver."""
    h = 1.0 / (n - 1)
    basis = kl_expansion(n, n, GrfSpec(sigma0, length_scale, n_modes))
    rng = np.random.default_rng(seed)
    counts = {"train": n_train, "val": n_val, "test": n_test}
    splits, sources = {}, {}
    for split in SPLITS:
        f = sample_grf(basis, rng, counts[split])
        truths = np.stack([
            solve_poisson_dirichlet(-fk, g, (h, h)) for fk in f])[:, None]
        splits[split] = Samples(np.ascontiguousarray(f[:, None]), truths)
        sources[split] = f
    return PoissonSource(
        name="poisson_source",
        grid_shape=(n, n),
        h=(h, h),
        g=g,
        splits=splits,
        sources=sources,
    )


def make_darcy_flow(n=32, n_modes=64, sigma0=1.0, length_scale=0.25,
                    n_train=32, n_val=8, n_test=16, seed=0):
    """Darcy flow with log-normal permeability; truths from the FV solver."""
    h = 1.0 / (n - 1)
    basis = kl_expansion(n, n, GrfSpec(sigma0, length_scale, n_modes))
    rng = np.random.default_rng(seed)
    counts = {"train": n_train, "val": n_val, "test": n_test}
    splits, perms = {}, {}
    for split in SPLITS:
        K = np.exp(sample_grf(basis, rng, counts[split]))
        truths = np.stack([
            solve_darcy_flow(Kk, 1.0, 0.0, (h, h)) for Kk in K])[:, None]
        splits[split] = Samples(np.ascontiguousarray(K[:, None]), truths)
        perms[split] = K
    return DarcyFlow(
        name="darcy_flow",
        grid_shape=(n, n),
        h=(h, h),
        splits=splits,
        perms=perms,
    )


_BUILDERS = {
    "heat_annulus": make_heat_annulus,
    "poisson_source": make_poisson_source,
    "darcy_flow": make_darcy_flow,
}


def make_problem(name, **kwargs):
    if name not in _BUILDERS:
        raise ValueError(f"unknown problem {name!r}; expected one of {sorted(_BUILDERS)}")
    return _BUILDERS[name](**kwargs)
