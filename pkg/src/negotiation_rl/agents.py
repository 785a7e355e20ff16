"""Scripted negotiators: time-dependent, baseline and imitative strategies.

Every agent keeps its offers as the shares *it keeps*. Histories live on the
instance and are cleared by ``reset``; build one instance per concurrent
game (``clone`` gives a fresh copy).
"""

from __future__ import annotations

import copy
import dataclasses
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp import simplex_solve
from .protocol import Agent, ContractViolation, elapsed_fraction

PLANAR = "planar"
PREFERENCE = "preference"


@dataclass
class TimeAgentConfig:
    concession: float = 1.0
    k: float = 0.0
    p_min: float = 0.0
    p_max: float = 1.0
    offer_mode: str = PREFERENCE
    noise_sigma: float = 0.05

    def __post_init__(self):
        if self.concession <= 0:
            raise ContractViolation("concession factor must be positive")
        if self.p_min > self.p_max:
            raise ContractViolation("p_min exceeds p_max")
        if not 0.0 <= self.k <= 1.0:
            raise ContractViolation("k must lie in [0, 1]")
        if self.offer_mode not in (PLANAR, PREFERENCE):
            raise ContractViolation(f"unknown offer mode {self.offer_mode!r}")
        if self.noise_sigma < 0:
            raise ContractViolation("noise_sigma must be non-negative")


def decision_utility(config: TimeAgentConfig, t: float, T: float) -> float:
    """Target utility u(t) = p_min + (p_max - p_min) * (1 - F(t)).

    ``F(t) = k + (1 - k) * (t / T) ** (1 / c)``.
    """
    if not 0.0 <= t <= T:
        raise ContractViolation(f"time {t} outside [0, {T}]")
    F = config.k + (1.0 - config.k) * (t / T) ** (1.0 / config.concession)
    return config.p_min + (config.p_max - config.p_min) * (1.0 - F)


def time_agent_accept(config: TimeAgentConfig, received_shares, t: float, T: float,
                      own_weights) -> bool:
    w = np.asarray(own_weights, float)
    value = float(w @ np.asarray(received_shares, float)) / float(w.sum())
    return value >= decision_utility(config, t, T)


def preference_concession_shares(u_d: float, own_weights) -> np.ndarray:
    """Noise-free kept shares worth ``u_d`` (normalised), least-valued issues given up first."""
    w = np.asarray(own_weights, float)
    x = np.ones_like(w)
    excess = (1.0 - u_d) * w.sum()
    for i in np.argsort(w, kind="stable"):
        if excess <= 0:
            break
        if w[i] == 0:
            x[i] = 0.0
            continue
        give = min(1.0, excess / w[i])
        x[i] = 1.0 - give
        excess -= give * w[i]
    return x


def preference_concession_offer(config: TimeAgentConfig, t: float, T: float, own_weights,
                                rng: np.random.Generator) -> np.ndarray:
    u_d = decision_utility(config, t, T)
    x = preference_concession_shares(u_d, own_weights)
    if config.noise_sigma > 0:
        x = x + rng.normal(0.0, config.noise_sigma, size=x.shape)
    return np.clip(x, 0.0, 1.0)


def planar_shares(u_d: float, own_weights, rng: np.random.Generator,
                  max_tries: int = 10_000, batch: int = 256) -> np.ndarray:
    """Uniform point of ``{x in [0,1]^m : w @ x / sum(w) = u_d}`` by rejection.

    Free coordinates are drawn uniformly and the highest-weight coordinate is
    solved from the plane equation. After ``max_tries`` misses the
    preference-concession point (which lies on the same plane) is returned.
    """
    w = np.asarray(own_weights, float)
    if not -1e-12 <= u_d <= 1 + 1e-12:
        raise ContractViolation(f"decision utility {u_d} cannot meet the unit cube")
    target = u_d * w.sum()
    if u_d >= 1.0:
        return np.ones_like(w)
    if u_d <= 0.0:
        return np.zeros_like(w)
    solve = int(np.argmax(w))
    free = [j for j in range(len(w)) if j != solve]
    tried = 0
    while tried < max_tries:
        n = min(batch, max_tries - tried)
        tried += n
        draws = rng.random((n, len(free)))
        last = (target - draws @ w[free]) / w[solve]
        ok = np.flatnonzero((last >= 0.0) & (last <= 1.0))
        if ok.size:
            x = np.empty_like(w)
            x[free] = draws[ok[0]]
            x[solve] = last[ok[0]]
            return np.clip(x, 0.0, 1.0)
    return preference_concession_shares(u_d, w)


def planar_offer(config: TimeAgentConfig, t: float, T: float, own_weights,
                 rng: np.random.Generator) -> np.ndarray:
    return planar_shares(decision_utility(config, t, T), own_weights, rng)


def hardliner_offer(m: int = 3) -> np.ndarray:
    return np.ones(m)


def random_walker_offer(rng: np.random.Generator, m: int = 3) -> np.ndarray:
    return rng.random(m)


@dataclass
class TftState:
    """Histories for reciprocal strategies.

    ``opponent_offer_history`` holds, per opponent offer, the share of each
    issue the opponent concedes to *this* agent; ``own_offer_history`` holds
    this agent's kept shares. Both therefore measure the same quantity, this
    agent's portion, which is what makes the ratio rule reciprocal.
    """

    delta_lag: int = 1
    own_offer_history: list = field(default_factory=list)
    opponent_offer_history: list = field(default_factory=list)
    issue_bounds: Optional[list] = None

    def clear(self):
        self.own_offer_history.clear()
        self.opponent_offer_history.clear()


def _safe_ratio(num, den):
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    out = np.ones_like(num)
    nz = den != 0
    with np.errstate(over="ignore"):
        # A subnormal denominator can overflow; callers clamp to the issue bounds.
        out[nz] = num[nz] / den[nz]
    return out


def relative_tft_offer(state: TftState, t: int = 0) -> np.ndarray:
    """Scale the previous own offer by the opponent's recent concession ratio.

    Falls back to the full-pie opening until ``2 * delta_lag`` opponent offers
    and one own offer exist.
    """
    d = state.delta_lag
    opp = state.opponent_offer_history
    m = len(opp[0]) if opp else (len(state.own_offer_history[0]) if state.own_offer_history else 3)
    if len(opp) < max(2 * d, d + 1) or not state.own_offer_history:
        return np.ones(m)
    ratio = _safe_ratio(opp[-d - 1], opp[-d])
    bounds = np.asarray(state.issue_bounds if state.issue_bounds is not None else [(0.0, 1.0)] * m)
    x = ratio * np.asarray(state.own_offer_history[-1], float)
    return np.minimum(np.maximum(x, bounds[:, 0]), bounds[:, 1])


@dataclass
class OpponentValueEstimate:
    weights_estimate: np.ndarray
    scale: float = 6.0


def estimate_opponent_weights(opponent_kept_history, scale: float = 6.0) -> OpponentValueEstimate:
    """Average of the opponent's normalised demands, rescaled to ``scale``.

    An opponent that keeps more of an issue is assumed to value it more. An
    all-zero demand counts as uniform.
    """
    hist = np.asarray(opponent_kept_history, float)
    if hist.ndim != 2 or hist.shape[0] == 0:
        raise ContractViolation("estimate needs at least one opponent offer")
    sums = hist.sum(axis=1, keepdims=True)
    m = hist.shape[1]
    normed = np.where(sums > 0, hist / np.where(sums > 0, sums, 1.0), 1.0 / m)
    return OpponentValueEstimate(scale * normed.mean(axis=0), scale)


def bayesian_tft_offer(target: float, own_weights, estimate: OpponentValueEstimate) -> np.ndarray:
    """Kept shares worth ``target`` to us that leave the opponent the most.

    ``target`` is in raw utility units and is clamped into ``[0, sum(w)]``.
    """
    w = np.asarray(own_weights, float)
    target = min(max(float(target), 0.0), float(w.sum()))
    return simplex_solve(-np.asarray(estimate.weights_estimate, float), (w, target))


class TimeAgent(Agent):
    """Boulware (c < 1), linear (c = 1) or Conceder (c > 1) negotiator."""

    def __init__(self, config: Optional[TimeAgentConfig] = None, **kwargs):
        self.config = config or TimeAgentConfig(**kwargs)
        self.name = f"time(c={self.config.concession:g},mode={self.config.offer_mode})"

    def reset(self, scenario, player, rng):
        super().reset(scenario, player, rng)
        # The scenario's reserve price is a floor on the configured minimum.
        self.active = dataclasses.replace(self.config, p_min=max(self.config.p_min, scenario.reserve))

    def target(self, round: int) -> float:
        T = self.scenario.deadline
        return decision_utility(self.active, elapsed_fraction(round, T) * T, T)

    def propose(self, round):
        T = self.scenario.deadline
        t = elapsed_fraction(round, T) * T
        w = self.scenario.weights(self.player)
        if self.config.offer_mode == PLANAR:
            return planar_offer(self.active, t, T, w, self.rng)
        return preference_concession_offer(self.active, t, T, w, self.rng)

    def decide(self, offer, round):
        T = self.scenario.deadline
        return time_agent_accept(self.active, offer.share_for(self.player),
                                 elapsed_fraction(round, T) * T, T,
                                 self.scenario.weights(self.player))


class Hardliner(Agent):
    """Demands the whole pie and accepts only the whole pie."""

    name = "hardliner"

    def propose(self, round):
        return hardliner_offer(self.scenario.issue_count)

    def decide(self, offer, round):
        return bool(np.all(offer.share_for(self.player) >= 1.0))


class RandomWalker(Agent):
    """Uniform random demands; accepts a coin flip."""

    name = "random"

    def propose(self, round):
        return random_walker_offer(self.rng, self.scenario.issue_count)

    def decide(self, offer, round):
        return bool(self.rng.random() < 0.5)


class AcceptAll(Agent):
    name = "accept_all"

    def propose(self, round):
        return np.zeros(self.scenario.issue_count)

    def decide(self, offer, round):
        return True


class FixedOffer(Agent):
    """Repeats one offer and never accepts; handy in tests and demos."""

    def __init__(self, shares):
        self.shares = np.asarray(shares, float)
        self.name = f"fixed({','.join(f'{v:g}' for v in self.shares)})"

    def propose(self, round):
        return self.shares.copy()

    def decide(self, offer, round):
        return False


class RelativeTitForTat(Agent):
    """Concedes in proportion to the opponent's concessions ``delta`` offers back."""

    def __init__(self, delta: int = 1, bounds=None):
        if delta < 1:
            raise ContractViolation("delta must be a positive integer")
        self.state = TftState(delta_lag=delta, issue_bounds=bounds)
        self.name = f"tft(delta={delta})"

    def reset(self, scenario, player, rng):
        super().reset(scenario, player, rng)
        self.state.clear()

    def observe(self, offer):
        self.state.opponent_offer_history.append(offer.share_for(self.player))

    def propose(self, round):
        x = relative_tft_offer(self.state, round)
        self.state.own_offer_history.append(x)
        return x

    def decide(self, offer, round):
        # Accept anything at least as good as what we would demand next.
        w = self.scenario.weights(self.player)
        nxt = relative_tft_offer(self.state, round)
        return float(w @ offer.share_for(self.player)) >= float(w @ nxt)


class BayesianTitForTat(Agent):
    """Mirrors concessions measured in own utility, then offers the bid the
    estimated opponent likes best at that utility (via the simplex LP)."""

    def __init__(self, delta: int = 1, scale: Optional[float] = None):
        if delta < 1:
            raise ContractViolation("delta must be a positive integer")
        self.delta = delta
        self.scale = scale
        self.name = f"bayes_tft(delta={delta})"

    def reset(self, scenario, player, rng):
        super().reset(scenario, player, rng)
        self.w = scenario.weights(player)
        self.target_utility = float(self.w.sum())
        self.opp_kept = []
        self.opp_value = []

    def observe(self, offer):
        portion = offer.share_for(self.player)
        self.opp_kept.append(1.0 - portion)
        self.opp_value.append(float(self.w @ portion))
        d = self.delta
        if len(self.opp_value) >= d + 1:
            older, newer = self.opp_value[-d - 1], self.opp_value[-d]
            ratio = older / newer if newer != 0 else 1.0
            lo = self.scenario.reserve * float(self.w.sum())
            self.target_utility = min(max(self.target_utility * ratio, lo), float(self.w.sum()))

    def propose(self, round):
        if not self.opp_kept:
            return np.ones_like(self.w)
        scale = self.scale if self.scale is not None else float(self.w.sum())
        est = estimate_opponent_weights(self.opp_kept, scale)
        return bayesian_tft_offer(self.target_utility, self.w, est)

    def decide(self, offer, round):
        return float(self.w @ offer.share_for(self.player)) >= self.target_utility - 1e-12


# -- agent zoo --------------------------------------------------------------

_SPEC = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def _parse_args(text: str) -> dict:
    out = {}
    if not text or not text.strip():
        return out
    for part in text.split(","):
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part.strip()!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        out[k] = v
    return out


def make_agent(spec: str) -> Agent:
    """Build a scripted agent from a zoo string such as ``time(c=0.3,mode=preference)``.

    Known names: ``time``, ``tft``, ``bayes_tft``, ``hardliner``, ``random``,
    ``accept_all``.
    """
    m = _SPEC.match(spec)
    if not m:
        raise ValueError(f"cannot parse agent spec {spec!r}")
    name, args = m.group(1), _parse_args(m.group(2) or "")
    if name == "time":
        kw = {
            "concession": float(args.pop("c", 1.0)),
            "k": float(args.pop("k", 0.0)),
            "p_min": float(args.pop("p_min", 0.0)),
            "p_max": float(args.pop("p_max", 1.0)),
            "offer_mode": args.pop("mode", PREFERENCE),
            "noise_sigma": float(args.pop("sigma", 0.05)),
        }
        agent = TimeAgent(TimeAgentConfig(**kw))
    elif name == "tft":
        agent = RelativeTitForTat(delta=int(args.pop("delta", 1)))
    elif name == "bayes_tft":
        agent = BayesianTitForTat(delta=int(args.pop("delta", 1)))
    elif name == "hardliner":
        agent = Hardliner()
    elif name == "random":
        agent = RandomWalker()
    elif name == "accept_all":
        agent = AcceptAll()
    else:
        raise ValueError(f"unknown agent {name!r}")
    if args:
        raise ValueError(f"unused parameters for {name}: {sorted(args)}")
    return agent


def clone(agent: Agent) -> Agent:
    return copy.deepcopy(agent)
