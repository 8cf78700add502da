"""Epoch loop behavior: convergence, divergence, determinism, curves."""

import csv

import numpy as np
import pytest

from picnn.constraints import apply_hard_constraint
from picnn.datasets import Samples, make_heat_annulus
from picnn.losses import LossEvaluator, LossGenome, vanilla_genome
from picnn.networks import CnnStack, Conv, default_choices
from picnn.tensor import Tensor
from picnn.training import (
    CURVE_FIELDS, TrainConfig, TrainResult, eval_metric, predict, train,
    write_curves,
)


def rng(seed=0):
    return np.random.default_rng(seed)


class DuckProblem:
    """y = 2x + 3 regression dressed up as a 1x1-grid field problem."""

    def __init__(self, r, n=16):
        x = r.normal(size=(n, 1, 1, 1))
        y = 2.0 * x + 3.0
        self.splits = {"train": Samples(x, y), "val": Samples(x, y)}
        self.h = (1.0, 1.0)
        self.grid_shape = (1, 1)


class LinearEvaluator:
    genome = vanilla_genome()

    def __init__(self, problem):
        self.problem = problem

    def new_state(self):
        return None

    def __call__(self, u, split, indices, state):
        y = Tensor(self.problem.splits[split].truths[list(indices)])
        return (u - y).square().mean()


def linreg(seed=0):
    r = rng(seed)
    problem = DuckProblem(r)
    return Conv(1, 1, 1, r), LinearEvaluator(problem)


class TestTrainLoop:
    def test_zero_epochs_leaves_network_unchanged(self):
        net, ev = linreg()
        before = [p.data.copy() for p in net.parameters()]
        res = train(net, ev, TrainConfig(epochs=0))
        assert res.status == "ok" and res.epochs_run == 0
        assert res.train_loss == [] and res.val_metric == []
        for p, b in zip(net.parameters(), before):
            assert np.array_equal(p.data, b)

    def test_linear_regression_loss_strictly_decreases(self):
        net, ev = linreg()
        res = train(net, ev, TrainConfig(epochs=60, lr=0.01))
        assert res.status == "ok"
        assert len(res.train_loss) == 60
        assert all(b < a for a, b in zip(res.train_loss, res.train_loss[1:]))

    def test_divergence_aborts_with_partial_trace(self):
        net, ev = linreg()

        class Bomb:
            genome = vanilla_genome()
            problem = ev.problem

            def new_state(self):
                return None

            def __call__(self, u, split, indices, state):
                self.calls = getattr(self, "calls", 0) + 1
                if self.calls == 3:
                    return Tensor(np.array(np.inf))
                return (u - Tensor(self.problem.splits[split]
                                   .truths[list(indices)])).square().mean()

        res = train(net, Bomb(), TrainConfig(epochs=10))
        assert res.status == "diverged"
        assert res.epochs_run == 2
        assert len(res.train_loss) == 2

    def test_deterministic_under_fixed_seed(self):
        def run():
            net, ev = linreg(7)
            res = train(net, ev, TrainConfig(epochs=20, lr=0.05))
            return res.train_loss, [p.data.copy() for p in net.parameters()]

        l1, p1 = run()
        l2, p2 = run()
        assert l1 == l2
        for a, b in zip(p1, p2):
            assert np.array_equal(a, b)

    def test_eval_every_carries_last_metric(self):
        net, ev = linreg()
        res = train(net, ev, TrainConfig(epochs=5, lr=0.01, eval_every=2))
        assert len(res.val_metric) == 5
        assert res.val_metric[1] == res.val_metric[0]
        assert res.val_metric[3] == res.val_metric[2]
        # last epoch always re-evaluates
        assert res.val_metric[4] == res.final_val

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=-1)
        with pytest.raises(ValueError):
            TrainConfig(metric="nope")
        with pytest.raises(ValueError):
            TrainConfig(eval_every=0)


class TestPredict:
    def test_soft_prediction_is_raw_output(self):
        net, ev = linreg()
        x = ev.problem.splits["val"].inputs
        want = net(Tensor(x)).data
        assert np.array_equal(predict(net, ev, "val"), want)

    def test_hard_prediction_applies_constraint_per_sample(self):
        problem = make_heat_annulus(n_rho=8, n_theta=16)
        ev = LossEvaluator(LossGenome(constraint="hard"), problem)
        net = CnnStack(default_choices("cnn_stack"), 1, rng(1))
        # val batch mixes the two inner temperatures -> per-sample fallback
        got = predict(net, ev, "val")
        for i in range(2):
            u = net(Tensor(problem.splits["val"].inputs[i:i + 1]))
            want = apply_hard_constraint(u, problem.bc_for("val", [i]),
                                         problem.h).data
            assert np.allclose(got[i:i + 1], want, atol=0, rtol=0)

    def test_eval_metric_on_exact_prediction_is_zero(self):
        net, ev = linreg()

        class Oracle:
            def __init__(self, y):
                self.y = y

            def parameters(self):
                return []

            def __call__(self, x):
                return Tensor(self.y)

        oracle = Oracle(ev.problem.splits["val"].truths)
        assert eval_metric(oracle, ev, "val") == 0.0


class TestHeatSmoke:
    def test_hard_constraint_training_improves_quickly(self):
        problem = make_heat_annulus(n_rho=16, n_theta=32)
        ev = LossEvaluator(LossGenome(constraint="hard"), problem)
        net = CnnStack(default_choices("cnn_stack"), 1, rng(3))
        res = train(net, ev, TrainConfig(epochs=100, batch_size=1,
                                         eval_every=10))
        assert res.status == "ok"
        assert res.train_loss[-1] < 0.01 * res.train_loss[0]
        assert res.final_val < 0.2 * res.val_metric[0]


class TestCurves:
    def test_csv_has_fixed_header_and_one_row_per_epoch(self, tmp_path):
        net, ev = linreg()
        res = train(net, ev, TrainConfig(epochs=8, lr=0.01))
        path = tmp_path / "curves.csv"
        write_curves(path, res)
        rows = list(csv.reader(open(path)))
        assert rows[0] == list(CURVE_FIELDS)
        assert len(rows) == 1 + 8
        assert [float(r[1]) for r in rows[1:]] == pytest.approx(res.train_loss)
