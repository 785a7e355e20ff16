"""Alternating-offers mechanism for bilateral multi-issue bargaining.

Offers are package deals over ``m`` divisible issues. An offer records the
share of every issue the *proposer* keeps; the responder receives the
complement. Rounds are numbered from 1 and each round holds exactly one
proposal and one response, so after a rejection the responder becomes the
next proposer ("swap places").
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

TRANSCRIPT_SCHEMA = "negotiation-transcript/1"

ACCEPTED = "accepted"
CONFLICT = "conflict_deal"

PLAYERS = ("A", "B")


class ContractViolation(ValueError):
    """Raised when an operation is called outside its documented domain."""


def other(player: str) -> str:
    return "B" if player == "A" else "A"


@dataclass(frozen=True)
class Scenario:
    """Preferences and time pressure shared by both negotiators.

    ``discount`` above 1 is only legal with ``growth=True``: the centipede
    variant where the pie grows each round.
    """

    weights_a: tuple = (1.0, 2.0, 3.0)
    weights_b: tuple = (3.0, 2.0, 1.0)
    discount: float = 1.0
    deadline: int = 20
    reserve: float = 0.0
    growth: bool = False

    def __post_init__(self):
        wa = tuple(float(w) for w in self.weights_a)
        wb = tuple(float(w) for w in self.weights_b)
        object.__setattr__(self, "weights_a", wa)
        object.__setattr__(self, "weights_b", wb)
        if len(wa) != len(wb) or not wa:
            raise ContractViolation("weight vectors must share a non-zero length")
        for ws in (wa, wb):
            if min(ws) < 0 or max(ws) <= 0:
                raise ContractViolation(f"weights {ws} need a positive entry and no negatives")
        limit = 1.3 if self.growth else 1.0
        if not 0.0 < self.discount <= limit + 1e-12:
            raise ContractViolation(f"discount {self.discount} outside (0, {limit}]")
        if int(self.deadline) != self.deadline or self.deadline < 1:
            raise ContractViolation("deadline must be a positive integer")
        if not 0.0 <= self.reserve < 1.0:
            raise ContractViolation("reserve must lie in [0, 1)")

    @property
    def issue_count(self) -> int:
        return len(self.weights_a)

    def weights(self, player: str) -> np.ndarray:
        return np.asarray(self.weights_a if player == "A" else self.weights_b)

    def total(self, player: str) -> float:
        return float(sum(self.weights_a if player == "A" else self.weights_b))


DEFAULT_SCENARIO = Scenario()


@dataclass(frozen=True)
class Offer:
    """Shares kept by ``proposer``; the other player receives ``1 - shares``."""

    shares: tuple
    round: int
    proposer: str = "A"

    def __post_init__(self):
        s = tuple(float(v) for v in np.ravel(self.shares))
        object.__setattr__(self, "shares", s)
        if any(not (0.0 <= v <= 1.0) for v in s):
            raise ContractViolation(f"offer shares {s} leave [0, 1]")
        if self.round < 1:
            raise ContractViolation("rounds start at 1")
        if self.proposer not in PLAYERS:
            raise ContractViolation(f"unknown proposer {self.proposer!r}")

    def share_for(self, player: str) -> np.ndarray:
        x = np.asarray(self.shares)
        return x if player == self.proposer else 1.0 - x


def utility(scenario: Scenario, offer: Offer, round: int, perspective: str,
            normalized: bool = False) -> float:
    """Discounted linear additive utility of ``offer`` for ``perspective``.

    Zero once ``round`` exceeds the deadline (the conflict deal).
    """
    if round < 1:
        raise ContractViolation("rounds start at 1")
    w = scenario.weights(perspective)
    if len(offer.shares) != len(w):
        raise ContractViolation(
            f"offer has {len(offer.shares)} issues, scenario has {len(w)}")
    if round > scenario.deadline:
        return 0.0
    value = float(w @ offer.share_for(perspective))
    if normalized:
        value /= float(w.sum())
    return scenario.discount ** (round - 1) * value


def elapsed_fraction(round: int, deadline: int) -> float:
    """Time seen by agents: the share of the deadline already used up.

    Round 1 maps to 0, the final round to ``(T - 1) / T``.
    """
    return (round - 1) / deadline


class Agent:
    """Interface for anything that can sit at the table.

    Subclasses override :meth:`propose` and :meth:`decide`; the other hooks
    default to no-ops. ``propose`` returns the shares the agent keeps.
    """

    name = "agent"

    def reset(self, scenario: Scenario, player: str, rng: np.random.Generator) -> None:
        self.scenario = scenario
        self.player = player
        self.rng = rng

    def observe(self, offer: Offer) -> None:
        """Called with every offer the opponent makes, before any decision."""

    def propose(self, round: int) -> np.ndarray:
        raise NotImplementedError

    def decide(self, offer: Offer, round: int) -> bool:
        raise NotImplementedError

    def finish(self, transcript: "Transcript") -> None:
        """Called once the game is over."""


@dataclass
class Event:
    round: int
    actor: str
    action: str  # offer | counter | accept | reject | clamp
    shares: Optional[tuple] = None


@dataclass
class Transcript:
    events: list = field(default_factory=list)
    end_state: str = CONFLICT
    end_round: int = 0
    final_offer: Optional[Offer] = None
    final_rewards: tuple = (0.0, 0.0)
    game_id: int = 0

    @property
    def accepted(self) -> bool:
        return self.end_state == ACCEPTED

    def offers(self, proposer: Optional[str] = None) -> list:
        return [e for e in self.events
                if e.action in ("offer", "counter") and (proposer is None or e.actor == proposer)]


RewardFn = Callable[[Transcript, Scenario], tuple]


def outcome_utilities(transcript: Transcript, scenario: Scenario) -> tuple:
    """Plain discounted utilities; the conflict deal is worth nothing."""
    if not transcript.accepted:
        return (0.0, 0.0)
    t = transcript.end_round
    return tuple(utility(scenario, transcript.final_offer, t, p) for p in PLAYERS)


def _clean(raw, m: int) -> tuple:
    x = np.asarray(raw, dtype=float).reshape(-1)
    if x.shape != (m,):
        raise ContractViolation(f"agent proposed {x.shape[0]} shares for {m} issues")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("agent proposed non-finite shares")
    clipped = np.clip(x, 0.0, 1.0)
    return tuple(float(v) for v in clipped), not np.array_equal(clipped, x)


def run_negotiation(agent_a: Agent, agent_b: Agent, scenario: Scenario,
                    rng_seed=None, *, first_mover: str = "A",
                    one_sided: bool = False,
                    rewards: Optional[RewardFn] = None,
                    game_id: int = 0) -> Transcript:
    """Play one game to acceptance or the deadline.

    With ``one_sided=True`` only ``first_mover`` may have its offers accepted:
    the other side still counter-offers after every rejection (its offers are
    shown to the opponent) but the game can only end on its own acceptance.

    ``rng_seed`` may be an int, a SeedSequence or a Generator; the two agents
    get independent child streams.
    """
    if first_mover not in PLAYERS:
        raise ContractViolation(f"unknown first mover {first_mover!r}")
    if isinstance(rng_seed, np.random.Generator):
        streams = rng_seed.spawn(2)
    else:
        seq = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
        streams = [np.random.default_rng(s) for s in seq.spawn(2)]
    agents = {"A": agent_a, "B": agent_b}
    agent_a.reset(scenario, "A", streams[0])
    agent_b.reset(scenario, "B", streams[1])

    m = scenario.issue_count
    tr = Transcript(game_id=game_id)
    proposer = first_mover
    for t in range(1, scenario.deadline + 1):
        shares, clamped = _clean(agents[proposer].propose(t), m)
        if clamped:
            tr.events.append(Event(t, proposer, "clamp", shares))
        offer = Offer(shares, t, proposer)
        tr.events.append(Event(t, proposer, "offer", offer.shares))
        responder = other(proposer)
        agents[responder].observe(offer)
        if agents[responder].decide(offer, t):
            tr.events.append(Event(t, responder, "accept", offer.shares))
            tr.end_state, tr.end_round, tr.final_offer = ACCEPTED, t, offer
            break
        tr.events.append(Event(t, responder, "reject", offer.shares))
        tr.end_round = t
        if one_sided:
            if t == scenario.deadline:
                break
            counter, clamped = _clean(agents[responder].propose(t), m)
            if clamped:
                tr.events.append(Event(t, responder, "clamp", counter))
            c_offer = Offer(counter, t, responder)
            tr.events.append(Event(t, responder, "counter", c_offer.shares))
            agents[proposer].observe(c_offer)
        else:
            proposer = responder

    tr.final_rewards = tuple(float(r) for r in (rewards or outcome_utilities)(tr, scenario))
    agent_a.finish(tr)
    agent_b.finish(tr)
    return tr


def transcript_rows(transcript: Transcript, m: int) -> Iterable[list]:
    ra, rb = transcript.final_rewards
    for e in transcript.events:
        shares = list(e.shares) if e.shares is not None else [""] * m
        yield [transcript.game_id, e.round, e.actor, e.action, *shares, ra, rb, transcript.end_state]


def transcript_header(m: int) -> list:
    return ["game_id", "round", "actor", "action",
            *[f"share_{i + 1}" for i in range(m)], "reward_a", "reward_b", "end_state"]


def write_transcripts(transcripts: Sequence[Transcript], m: int, fh) -> None:
    """Write one CSV row per event, preceded by a schema comment line."""
    fh.write(f"# schema: {TRANSCRIPT_SCHEMA}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(transcript_header(m))
    for tr in transcripts:
        for row in transcript_rows(tr, m):
            w.writerow([_fmt(v) for v in row])


def read_transcript_rows(fh) -> list:
    lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
