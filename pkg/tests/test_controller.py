"""Policy controller: sampling, log-probs, REINFORCE updates."""

import numpy as np
import pytest

from picnn.networks import SearchSpace, SlotSpec, search_space
from picnn.controller import Controller, reward_from_error


def bandit_space(n_arms=2):
    names = tuple(f"op{i}" for i in range(n_arms))
    return SearchSpace("bandit", (SlotSpec("arm", names),))


def make(space, seed=0, **kw):
    return Controller(space, np.random.default_rng(seed), **kw)


class TestReward:
    def test_reciprocal(self):
        assert reward_from_error(0.05) == pytest.approx(20.0)
        assert reward_from_error(1.0) == 1.0

    def test_nonpositive_clamps_and_warns(self, caplog):
        with caplog.at_level("WARNING"):
            r = reward_from_error(0.0)
        assert r == pytest.approx(1e8)
        assert "clamped" in caplog.text


class TestSampling:
    def test_log_probs_one_per_slot(self):
        space = search_space("cnn_stack")
        ctrl = make(space)
        choices, lps = ctrl.sample(np.random.default_rng(1))
        assert len(lps) == len(space.slots)
        space.validate(choices)

    def test_distributions_normalized(self):
        space = search_space("unet_cell")
        ctrl = make(space, seed=2)
        choices, _ = ctrl.sample(np.random.default_rng(3))
        for p in ctrl.slot_distributions(choices):
            assert abs(p.sum() - 1.0) < 1e-9

    def test_initial_policy_exactly_uniform(self):
        space = search_space("cnn_stack")
        ctrl = make(space, seed=4)
        for p in ctrl.slot_distributions({s.name: s.candidates[0]
                                          for s in space.slots}):
            assert np.allclose(p, 1.0 / len(p), atol=1e-12)

    def test_empirical_slot_distribution_uniform(self):
        # Monte-Carlo check of the sampler against the uniform start
        space = search_space("cnn_stack")
        ctrl = make(space, seed=5)
        rng = np.random.default_rng(6)
        n = 2000
        counts = {s.name: {} for s in space.slots}
        for _ in range(n):
            choices, _ = ctrl.sample(rng)
            for name, op in choices.items():
                counts[name][op] = counts[name].get(op, 0) + 1
        for slot in space.slots:
            k = len(slot.candidates)
            sigma = np.sqrt(n * (1 / k) * (1 - 1 / k))
            for op in slot.candidates:
                assert abs(counts[slot.name].get(op, 0) - n / k) < 3 * sigma

    def test_argmax_decode_deterministic(self):
        ctrl = make(search_space("unet_cell"), seed=7)
        assert ctrl.argmax_choices() == ctrl.argmax_choices()

    def test_log_prob_matches_sampled_path(self):
        space = search_space("unet_cell")
        ctrl = make(space, seed=8)
        choices, lps = ctrl.sample(np.random.default_rng(9))
        again = ctrl.log_prob(choices)
        for a, b in zip(lps, again):
            assert float(a.data) == pytest.approx(float(b.data), abs=1e-12)


class TestReinforce:
    def test_constant_reward_is_a_fixed_point(self):
        ctrl = make(bandit_space(), seed=10)
        before = [p.data.copy() for p in ctrl.parameters()]
        rng = np.random.default_rng(11)
        for _ in range(5):
            _, lps = ctrl.sample(rng)
            ctrl.reinforce(lps, 1.0)
        for p, b in zip(ctrl.parameters(), before):
            assert np.array_equal(p.data, b)

    def test_positive_advantage_raises_log_prob(self):
        ctrl = make(bandit_space(3), seed=12)
        genome = {"arm": "op1"}
        before = float(ctrl.log_prob(genome)[0].data)
        ctrl.baseline = 0.5
        ctrl.reinforce(ctrl.log_prob(genome), reward=2.0)
        after = float(ctrl.log_prob(genome)[0].data)
        assert after > before

    def test_negative_advantage_lowers_log_prob(self):
        ctrl = make(bandit_space(3), seed=13)
        genome = {"arm": "op2"}
        before = float(ctrl.log_prob(genome)[0].data)
        ctrl.baseline = 0.5
        ctrl.reinforce(ctrl.log_prob(genome), reward=0.1)
        after = float(ctrl.log_prob(genome)[0].data)
        assert after < before

    def test_baseline_tracks_rewards(self):
        ctrl = make(bandit_space(), seed=14)
        rng = np.random.default_rng(15)
        _, lps = ctrl.sample(rng)
        ctrl.reinforce(lps, 2.0)
        assert ctrl.baseline == 2.0
        _, lps = ctrl.sample(rng)
        ctrl.reinforce(lps, 1.0)
        assert ctrl.baseline == pytest.approx(0.9 * 2.0 + 0.1 * 1.0)

    def test_bandit_converges_to_best_arm(self):
        # smoke-scale version of the statistical run in the acceptance suite
        medians = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            ctrl = Controller(bandit_space(), rng)
            for _ in range(200):
                choices, lps = ctrl.sample(rng)
                ctrl.reinforce(lps, 1.0 if choices["arm"] == "op0" else 0.1)
            medians.append(ctrl.slot_distributions({"arm": "op0"})[0][0])
        assert np.median(medians) > 0.9
