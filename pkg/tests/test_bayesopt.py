"""GP surrogate, EI suggestion, and median stopping."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from picnn.losses import LossGenome, vanilla_genome
from picnn.bayesopt import (
    GpFitError, GpSurrogate, TrialRecord,
    expected_improvement, encode_genome, enumerate_genomes,
    bo_suggest, median_stop_check, _matern52,
)


class TestMaternKernel:
    def test_unit_at_zero_and_decreasing(self):
        a = np.zeros((1, 3))
        bs = np.linspace(0, 3, 10)[:, None] * np.ones(3)
        k = _matern52(a, bs, 1.0)[0]
        assert abs(k[0] - 1.0) < 1e-12
        assert (np.diff(k) < 0).all()

    def test_positive_semidefinite(self):
        X = np.random.default_rng(0).normal(size=(40, 5))
        K = _matern52(X, X, 1.3)
        eig = np.linalg.eigvalsh(K)
        assert eig.min() > -1e-10


class TestGpSurrogate:
    def fitted(self, seed=0, n=12, d=4):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        y = np.sin(X[:, 0]) + 0.1 * X[:, 1]
        gp = GpSurrogate()
        for xi, yi in zip(X, y):
            gp.add(xi, yi)
        gp.fit()
        return gp, X, y

    def test_interpolates_observations(self):
        gp, X, y = self.fitted()
        mean, var = gp.predict(X)
        scale = np.abs(y).max()
        assert np.abs(mean - y).max() < 1e-3 * scale
        assert (var >= 0).all()
        assert var.max() < 1e-3

    def test_posterior_variance_nonnegative_off_data(self):
        gp, X, _ = self.fitted()
        Xq = np.random.default_rng(1).normal(size=(50, X.shape[1]))
        _, var = gp.predict(Xq)
        assert (var >= 0).all()

    def test_needs_two_observations(self):
        gp = GpSurrogate()
        gp.add(np.zeros(3), 1.0)
        with pytest.raises(GpFitError):
            gp.fit()

    def test_rejects_non_finite(self):
        gp = GpSurrogate()
        gp.add(np.zeros(3), 1.0)
        gp.add(np.array([np.nan, 0, 0]), 2.0)
        with pytest.raises(GpFitError):
            gp.fit()

    def test_best_y(self):
        gp, _, y = self.fitted()
        assert gp.best_y == y.min()


class TestExpectedImprovement:
    def test_zero_variance_at_best_is_zero(self):
        ei = expected_improvement(np.array([0.5]), np.array([0.0]), 0.5)
        assert ei[0] == 0.0

    def test_hand_formula(self):
        # best=1, mean=0, sd=1: EI = 1*cdf(1) + pdf(1)
        ei = expected_improvement(np.array([0.0]), np.array([1.0]), 1.0)
        want = norm.cdf(1.0) + norm.pdf(1.0)
        assert abs(ei[0] - want) < 1e-12

    def test_nonnegative_and_increasing_with_uncertainty(self):
        mean = np.full(3, 2.0)
        var = np.array([0.1, 1.0, 4.0])
        ei = expected_improvement(mean, var, 1.0)
        assert (ei >= 0).all()
        assert ei[0] < ei[1] < ei[2]


class TestEncoding:
    def test_one_hot_blocks(self):
        v = encode_genome(vanilla_genome())
        assert v.shape == (21,)
        assert v[0:3].sum() == 1.0     # constraint
        assert v[3:7].sum() == 1.0     # kernel family
        assert v[7:10].sum() == 1.0    # unary
        assert v[10:14].sum() == 1.0   # weight op

    def test_inert_knobs_share_encoding(self):
        a = LossGenome(weight_op="unitize", eta1=0.5, rho=0.01)
        b = LossGenome(weight_op="unitize", eta1=2.0, rho=0.1)
        assert np.array_equal(encode_genome(a), encode_genome(b))

    def test_live_knobs_separate_encodings(self):
        a = LossGenome(weight_op="normalize", eta1=0.5)
        b = LossGenome(weight_op="normalize", eta1=2.0)
        assert not np.array_equal(encode_genome(a), encode_genome(b))

    def test_numeric_dims_log_normalized(self):
        g = LossGenome(weight_op="normalize", eta1=1.0)
        v = encode_genome(g)
        assert abs(v[17] - 0.5) < 1e-12    # midpoint of {0.5, 2} in log space


class TestEnumeration:
    def test_space_size(self):
        # 3 constraint * 4 family * 3 unary * 2 add-ones, times the
        # weight-op grids (1+3+2+1=7), enhance (1+2), boundary (1+2)
        gs = enumerate_genomes()
        assert len(gs) == 3 * 4 * 3 * 2 * 7 * 3 * 3

    def test_no_duplicates_and_contains_vanilla(self):
        gs = enumerate_genomes()
        assert len(set(gs)) == len(gs)
        assert vanilla_genome() in gs

    def test_restriction(self):
        gs = enumerate_genomes(constraints=("soft",), families=("central2",))
        assert len(gs) == 3 * 2 * 7 * 3 * 3
        assert all(g.constraint == "soft" for g in gs)


class TestBoSuggest:
    def test_fallback_when_unfittable(self):
        candidates = enumerate_genomes(constraints=("soft",),
                                       families=("central2",))
        encoded = np.stack([encode_genome(g) for g in candidates])
        gp = GpSurrogate()
        gp.add(encoded[0], 0.5)   # a single point cannot be fit
        idx, info = bo_suggest(gp, candidates, encoded, {0},
                               np.random.default_rng(0))
        assert info["fallback"] is True
        assert idx != 0

    def test_never_suggests_tried(self):
        candidates = enumerate_genomes(constraints=("soft",),
                                       families=("central2",))
        encoded = np.stack([encode_genome(g) for g in candidates])
        rng = np.random.default_rng(1)
        gp = GpSurrogate()
        tried = set()
        for i in (0, 5, 9):
            gp.add(encoded[i], float(i))
            tried.add(i)
        for _ in range(5):
            idx, _ = bo_suggest(gp, candidates, encoded, tried, rng)
            assert idx not in tried
            gp.add(encoded[idx], 1.0)
            tried.add(idx)

    def test_exhaustion_raises(self):
        candidates = [vanilla_genome()]
        encoded = np.stack([encode_genome(candidates[0])])
        with pytest.raises(ValueError):
            bo_suggest(GpSurrogate(), candidates, encoded, {0},
                       np.random.default_rng(0))

    def test_finds_planted_optimum_quickly(self):
        """Smoke version of the search guarantee: on a smooth synthetic
        objective the GP finds the planted best well inside 30% of the
        space (full-scale statistical run lives in the acceptance suite)."""
        candidates = enumerate_genomes(constraints=("soft",),
                                       families=("central2",))
        encoded = np.stack([encode_genome(g) for g in candidates])
        target = encoded[271]

        def objective(i):
            return float(((encoded[i] - target) ** 2).sum())

        counts = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            gp = GpSurrogate()
            tried = set()
            found = None
            for i in rng.choice(len(candidates), size=8, replace=False):
                gp.add(encoded[i], objective(int(i)))
                tried.add(int(i))
                if int(i) == 271:
                    found = len(tried)
            while found is None:
                idx, _ = bo_suggest(gp, candidates, encoded, tried, rng)
                gp.add(encoded[idx], objective(idx))
                tried.add(idx)
                if idx == 271:
                    found = len(tried)
            counts.append(found)
        assert np.median(counts) <= 0.3 * len(candidates)


class TestMedianStopping:
    def done(self, trace):
        t = TrialRecord(genome=vanilla_genome(), trace=list(trace))
        t.finish()
        return t

    def test_no_completed_trials_never_stops(self):
        trial = TrialRecord(genome=vanilla_genome(), trace=[0.9] * 20)
        assert median_stop_check(trial, [], 19, 100) is False

    def test_worse_than_median_stops(self):
        completed = [self.done([v] * 50) for v in (0.1, 0.2, 0.3)]
        trial = TrialRecord(genome=vanilla_genome(), trace=[0.9] * 50)
        assert median_stop_check(trial, completed, 30, 100) is True

    def test_exactly_at_median_continues(self):
        completed = [self.done([v] * 50) for v in (0.1, 0.2, 0.3)]
        trial = TrialRecord(genome=vanilla_genome(), trace=[0.2] * 50)
        assert median_stop_check(trial, completed, 30, 100) is False

    def test_grace_period(self):
        completed = [self.done([0.1] * 50)]
        trial = TrialRecord(genome=vanilla_genome(), trace=[9.9] * 50)
        assert median_stop_check(trial, completed, 5, 100) is False
        assert median_stop_check(trial, completed, 10, 100) is True

    def test_short_completed_traces_ignored(self):
        completed = [self.done([0.1] * 10)]   # stopped before this epoch
        trial = TrialRecord(genome=vanilla_genome(), trace=[0.9] * 50)
        assert median_stop_check(trial, completed, 30, 100) is False

    def test_running_average_not_final(self):
        # completed trial starts terrible, ends great: its running average
        # at epoch 4 is high, so a mediocre trial survives
        completed = [self.done([10.0, 10.0, 10.0, 10.0, 0.01])]
        trial = TrialRecord(genome=vanilla_genome(), trace=[5.0] * 5)
        assert median_stop_check(trial, completed, 4, 10) is False

    def test_trial_record_lifecycle(self):
        t = TrialRecord(genome=vanilla_genome())
        assert t.status == "running" and t.final_error is None
        t.trace.extend([0.5, 0.2, 0.3])
        assert t.best_so_far() == 0.2
        assert t.best_so_far(0) == 0.5
        t.finish()
        assert t.status == "completed" and t.final_error == 0.2
