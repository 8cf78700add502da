"""Problem builders: truth correctness, shapes, residual plumbing."""

import numpy as np
import pytest

from picnn.tensor import Tensor
from picnn.constraints import apply_hard_constraint, boundary_penalty
from picnn.datasets import make_heat_annulus, make_poisson_source, make_darcy_flow, make_problem
from picnn.linsolve import darcy_boundary_flux
from picnn.metrics import relative_l2, mae
from picnn.residuals import masked_mean


class TestMetrics:
    def test_relative_l2(self):
        truth = np.array([3.0, 4.0])
        assert relative_l2(truth, truth) == 0.0
        assert abs(relative_l2(np.array([3.0, 5.0]), truth) - 1.0 / 5.0) < 1e-15

    def test_relative_l2_rejects_zero_truth(self):
        with pytest.raises(ValueError):
            relative_l2(np.ones(3), np.zeros(3))

    def test_mae(self):
        assert mae(np.array([1.0, 3.0]), np.array([2.0, 1.0])) == 1.5

    def test_shape_guard(self):
        with pytest.raises(ValueError):
            relative_l2(np.ones(3), np.ones(4))


class TestHeatAnnulus:
    def setup_method(self):
        self.prob = make_heat_annulus(n_rho=16, n_theta=24)

    def test_split_contents(self):
        assert len(self.prob.splits["train"]) == 2
        assert len(self.prob.splits["test"]) == 5
        assert self.prob.splits["train"].inputs.shape == (2, 1, 16, 24)
        # validation reuses the training temperatures
        assert np.array_equal(self.prob.tin["val"], self.prob.tin["train"])

    def test_truth_is_log_profile_with_correct_rims(self):
        truth = self.prob.splits["test"].truths[0, 0]
        tin = self.prob.tin["test"][0]
        assert np.allclose(truth[0], tin)      # inner rim
        assert np.allclose(truth[-1], 0.0)     # outer rim
        # theta-independent
        assert np.allclose(truth.std(axis=1), 0.0)

    def test_truth_is_harmonic(self):
        truth = self.prob.splits["train"].truths[1:2]
        res = self.prob.residual(Tensor(truth), "train", [1], "central2")
        vals = res.field.data[0, 0][res.mask == 1.0]
        assert np.max(np.abs(vals)) < 0.2   # O(h^2) of the log profile

    def test_input_is_linear_interpolation(self):
        inp = self.prob.splits["train"].inputs[0, 0]
        tin = self.prob.tin["train"][0]
        assert np.allclose(inp[0], tin) and np.allclose(inp[-1], 0.0)
        rad_profile = inp[:, 0]
        diffs = np.diff(rad_profile)
        assert np.allclose(diffs, diffs[0])  # linear in rho

    def test_bc_matches_sample(self):
        bc = self.prob.bc_for("test", [2])
        assert bc.top.value == self.prob.tin["test"][2]
        assert bc.left.kind == "periodic"

    def test_mixed_batch_rejected(self):
        with pytest.raises(ValueError):
            self.prob.bc_for("train", [0, 1])

    def test_hard_constraint_round_trip(self):
        u = Tensor(np.random.default_rng(0).normal(size=(1, 1, 16, 24)))
        bc = self.prob.bc_for("train", [0])
        uc = apply_hard_constraint(u, bc, self.prob.h)
        assert boundary_penalty(uc, bc, self.prob.h).item() < 1e-24


class TestPoissonSource:
    def setup_method(self):
        self.prob = make_poisson_source(n=16, n_modes=8, sigma0=50.0,
                                        n_train=3, n_val=2, n_test=2, seed=1)

    def test_shapes(self):
        s = self.prob.splits["train"]
        assert s.inputs.shape == (3, 1, 16, 16)
        assert s.truths.shape == (3, 1, 16, 16)

    def test_truth_border_is_g(self):
        t = self.prob.splits["val"].truths[0, 0]
        assert np.allclose(t[0], 10.0) and np.allclose(t[:, -1], 10.0)

    def test_truth_satisfies_discrete_pde(self):
        # the 5-point solve and the central2 residual share the same stencil,
        # so the truth field zeroes the residual to solver tolerance
        idx = [0, 1]
        truths = self.prob.splits["train"].truths[idx]
        res = self.prob.residual(Tensor(truths), "train", idx, "central2")
        vals = np.abs(res.field.data[:, 0]) * res.mask
        assert np.max(vals) < 1e-6

    def test_residual_detects_wrong_field(self):
        wrong = np.full((1, 1, 16, 16), 10.0)
        res = self.prob.residual(Tensor(wrong), "train", [0], "central2")
        assert masked_mean(res.field.square(), res.mask).item() > 1.0

    def test_deterministic_given_seed(self):
        again = make_poisson_source(n=16, n_modes=8, sigma0=50.0,
                                    n_train=3, n_val=2, n_test=2, seed=1)
        assert np.array_equal(again.splits["test"].inputs,
                              self.prob.splits["test"].inputs)
        assert np.array_equal(again.splits["test"].truths,
                              self.prob.splits["test"].truths)

    def test_splits_are_distinct(self):
        a = self.prob.splits["train"].inputs[0]
        b = self.prob.splits["val"].inputs[0]
        assert not np.allclose(a, b)


class TestDarcyFlow:
    def setup_method(self):
        self.prob = make_darcy_flow(n=16, n_modes=16, n_train=3, n_val=2,
                                    n_test=2, seed=2)

    def test_shapes_and_positivity(self):
        s = self.prob.splits["train"]
        assert s.inputs.shape == (3, 1, 16, 16)
        assert np.all(s.inputs > 0.0)

    def test_truth_bcs(self):
        t = self.prob.splits["test"].truths[0, 0]
        assert np.allclose(t[:, 0], 1.0) and np.allclose(t[:, -1], 0.0)

    def test_truth_conserves_flux(self):
        t = self.prob.splits["train"].truths[0, 0]
        K = self.prob.perms["train"][0]
        fin, fout = darcy_boundary_flux(t, K, self.prob.h)
        assert abs(fin - fout) / abs(fin) < 1e-8

    def test_residual_small_on_truth(self):
        # FV truth vs composed-stencil residual: consistent to O(h), so the
        # masked mean-square is far below that of an untrained guess
        idx = [0]
        truths = self.prob.splits["train"].truths[idx]
        res = self.prob.residual(Tensor(truths), "train", idx, "central2")
        ms_truth = masked_mean(res.field.square(), res.mask).item()
        flat = np.broadcast_to(np.linspace(1, 0, 16)[None, :], (16, 16)).copy()
        res2 = self.prob.residual(Tensor(flat[None, None]), "train", idx, "central2")
        ms_flat = masked_mean(res2.field.square(), res2.mask).item()
        assert ms_truth < 0.5 * ms_flat

    def test_factory_dispatch(self):
        p = make_problem("heat_annulus", n_rho=8, n_theta=12)
        assert p.name == "heat_annulus"
        with pytest.raises(ValueError):
            make_problem("advection")
