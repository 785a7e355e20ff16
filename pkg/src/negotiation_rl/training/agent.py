"""A negotiator driven by an Accept Net and/or an Offer Net."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..neural.distributions import categorical_log_prob, log_prob, sample, softmax_policy
from ..protocol import Agent, Offer, elapsed_fraction
from .buffer import EpisodeBuffer

ACCEPT, REJECT = 0, 1


def observation(received, round: int, deadline: int) -> np.ndarray:
    """Network input: the portion last offered to us, then elapsed time."""
    return np.concatenate([np.asarray(received, float), [elapsed_fraction(round, deadline)]])


class NeuralAgent(Agent):
    """Samples decisions and offers from its nets and records them for training.

    Without an accept net the agent delegates decisions to ``fallback``
    (default: reject everything). Without an offer net it delegates proposals
    to ``fallback`` (default: demand the whole pie). ``action_set`` switches
    the offer net to a categorical choice among fixed offers.
    """

    def __init__(self, accept_net=None, offer_net=None, action_set: Optional[Sequence] = None,
                 fallback: Optional[Agent] = None, greedy: bool = False, record: bool = True):
        self.accept_net = accept_net
        self.offer_net = offer_net
        self.action_set = None if action_set is None else np.asarray(action_set, float)
        self.fallback = fallback
        self.greedy = greedy
        self.record = record
        self.accept_buffer = EpisodeBuffer()
        self.offer_buffer = EpisodeBuffer()
        self.reward = 0.0
        self.name = "neural"

    def reset(self, scenario, player, rng):
        super().reset(scenario, player, rng)
        self.accept_buffer.clear()
        self.offer_buffer.clear()
        self.received = np.zeros(scenario.issue_count)
        if self.fallback is not None:
            self.fallback.reset(scenario, player, rng)

    def observe(self, offer: Offer):
        self.received = offer.share_for(self.player)
        if self.fallback is not None:
            self.fallback.observe(offer)

    def _state(self, round: int) -> np.ndarray:
        return observation(self.received, round, self.scenario.deadline)

    def decide(self, offer, round):
        if self.accept_net is None:
            return self.fallback.decide(offer, round) if self.fallback is not None else False
        s = observation(offer.share_for(self.player), round, self.scenario.deadline)
        logits, value, _ = self.accept_net.forward(s)
        if self.greedy:
            a = int(np.argmax(logits[0]))
        else:
            a = sample_index(softmax_policy(logits[0]), self.rng)
        if self.record:
            self.accept_buffer.add(s, a, categorical_log_prob(logits, a), value[0])
        return a == ACCEPT

    def propose(self, round):
        if self.offer_net is None:
            if self.fallback is not None:
                return self.fallback.propose(round)
            return np.ones(self.scenario.issue_count)
        s = self._state(round)
        if self.action_set is not None:
            logits, value, _ = self.offer_net.forward(s)
            if self.greedy:
                a = int(np.argmax(logits[0]))
            else:
                a = sample_index(softmax_policy(logits[0]), self.rng)
            if self.record:
                self.offer_buffer.add(s, a, categorical_log_prob(logits, a), value[0])
            return self.action_set[a].copy()
        params, value, _ = self.offer_net.forward(s)
        if self.greedy:
            raw = params.first[0] if params.kind != "beta" else params.first[0] / (
                params.first[0] + params.second[0])
        else:
            raw = sample(params, self.rng)[0]
        if self.record:
            self.offer_buffer.add(s, raw, log_prob(params, raw), value[0])
        # The engine clamps; the buffer keeps the raw sample for unbiased gradients.
        return raw

    def finish(self, transcript):
        self.reward = transcript.final_rewards[0 if self.player == "A" else 1]
        if self.record:
            self.accept_buffer.close(self.reward)
            self.offer_buffer.close(self.reward)


def sample_index(p, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability vector with one uniform."""
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return min(idx, len(p) - 1)
