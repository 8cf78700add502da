"""Recurrent policy for sampling architectures slot by slot.

A single-layer LSTM walks the slots of a search space; at each step a
linear head turns the hidden state into a distribution over that slot's
candidates and the chosen op's embedding becomes the next input. Heads
start at zero so the initial policy is exactly uniform. Training is
plain policy-gradient ascent against an exponential-moving-average
reward baseline.
"""

from __future__ import annotations

import logging

import numpy as np

from .networks import Module
from .optim import clear_grads, sgd_step
from .tensor import Tensor, log_softmax, matmul, reduce_sum, reshape, slice_axis

__all__ = ["reward_from_error", "LSTMCell", "Controller"]

logger = logging.getLogger(__name__)

REWARD_EPS = 1e-8


def reward_from_error(error, eps=REWARD_EPS):
    """Reciprocal validation error; nonpositive errors clamp to eps."""
    if error <= 0:
        logger.warning("nonpositive validation error %g clamped to %g",
                       error, eps)
        error = eps
    return 1.0 / error


class LSTMCell(Module):
    def __init__(self, n_in, n_hidden, rng):
        super().__init__()
        self.n_hidden = n_hidden
        s = 1.0 / np.sqrt(n_hidden)
        self.wi = self.param(rng.uniform(-s, s, (n_in, 4 * n_hidden)))
        self.wh = self.param(rng.uniform(-s, s, (n_hidden, 4 * n_hidden)))
        self.b = self.param(np.zeros((1, 4 * n_hidden)))

    def __call__(self, x, h, c):
        nh = self.n_hidden
        z = matmul(x, self.wi) + matmul(h, self.wh) + self.b
        i = slice_axis(z, 1, 0, nh).sigmoid()
        f = slice_axis(z, 1, nh, 2 * nh).sigmoid()
        g = slice_axis(z, 1, 2 * nh, 3 * nh).tanh()
        o = slice_axis(z, 1, 3 * nh, 4 * nh).sigmoid()
        c2 = f * c + i * g
        return o * c2.tanh(), c2


class Controller(Module):
    """Autoregressive sampler over a SearchSpace with REINFORCE updates."""

    def __init__(self, space, rng, hidden=64, embed=32, lr=0.05,
                 baseline_decay=0.9):
        super().__init__()
        self.space = space
        self.lr = lr
        self.baseline_decay = baseline_decay
        self.baseline = None
        self.cell = self.child(LSTMCell(embed, hidden, rng))
        self.start = self.param(rng.normal(0.0, 0.1, (1, embed)))
        self.head_w = []
        self.head_b = []
        self.embeddings = []
        for slot in space.slots:
            k = len(slot.candidates)
            self.head_w.append(self.param(np.zeros((hidden, k))))
            self.head_b.append(self.param(np.zeros(k)))
            self.embeddings.append(
                self.param(rng.normal(0.0, 0.1, (k, embed))))

    def _walk(self, pick):
        """Run the recurrence; `pick(slot_index, log_prob_vector) -> index`."""
        hidden = self.cell.n_hidden
        h = Tensor(np.zeros((1, hidden)))
        c = Tensor(np.zeros((1, hidden)))
        inp = self.start
        choices, log_probs = {}, []
        for i, slot in enumerate(self.space.slots):
            h, c = self.cell(inp, h, c)
            logits = reshape(matmul(h, self.head_w[i]),
                             (len(slot.candidates),)) + self.head_b[i]
            lp = log_softmax(logits)
            a = pick(i, lp)
            choices[slot.name] = slot.candidates[a]
            log_probs.append(reduce_sum(slice_axis(lp, 0, a, a + 1)))
            inp = slice_axis(self.embeddings[i], 0, a, a + 1)
        return choices, log_probs

    def sample(self, rng):
        """Draw a genome; returns (choices, per-slot log-prob tensors)."""
        def pick(i, lp):
            p = np.exp(lp.data)
            return int(rng.choice(len(p), p=p / p.sum()))
        return self._walk(pick)

    def argmax_choices(self):
        """Deterministic most-likely genome (zero-temperature decode)."""
        choices, _ = self._walk(lambda i, lp: int(np.argmax(lp.data)))
        return choices

    def log_prob(self, choices):
        """Per-slot log probabilities of an existing genome."""
        def pick(i, lp):
            slot = self.space.slots[i]
            return slot.candidates.index(choices[slot.name])
        _, log_probs = self._walk(pick)
        return log_probs

    def slot_distributions(self, choices):
        """Probability vectors along the path that produces `choices`."""
        dists = []

        def pick(i, lp):
            dists.append(np.exp(lp.data))
            slot = self.space.slots[i]
            return slot.candidates.index(choices[slot.name])
        self._walk(pick)
        return dists

    def reinforce(self, log_probs, reward):
        """One policy-gradient ascent step; returns the advantage used.

        The baseline starts at the first reward seen, so a constant
        reward stream never moves the policy.
        """
        if self.baseline is None:
            self.baseline = float(reward)
        advantage = float(reward) - self.baseline
        self.baseline = (self.baseline_decay * self.baseline
                         + (1.0 - self.baseline_decay) * float(reward))
        total = log_probs[0]
        for lp in log_probs[1:]:
            total = total + lp
        params = self.parameters()
        clear_grads(params)
        (total * (-advantage)).backward()
        sgd_step(params, self.lr)
        return advantage
