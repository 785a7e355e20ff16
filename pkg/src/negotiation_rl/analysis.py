"""Closed-form and brute-force references for the negotiation game.

Outcome geometry (Pareto frontier, bid distribution, Nash solution), the
optimal-stopping curve for accepting against a time-based opponent together
with its derivatives, and backward induction on two-move game trees.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .protocol import ContractViolation, Scenario

NASH_POINT = (4.0, 4.0)


@dataclass(frozen=True)
class OutcomePoint:
    u_a: float
    u_b: float

    def __iter__(self):
        yield self.u_a
        yield self.u_b


@dataclass(frozen=True)
class Segment:
    """Line ``a * u_A + b * u_B + c = 0`` valid for ``u_A`` in ``[lo, hi]``."""

    a: float
    b: float
    c: float
    lo: float
    hi: float

    def distance(self, ua, ub):
        return np.abs(self.a * ua + self.b * ub + self.c) / math.hypot(self.a, self.b)


@dataclass(frozen=True)
class FrontierSpec:
    segments: tuple
    vertices: tuple  # generating corners of the action cube, from u_B-best to u_A-best
    points: tuple    # their images in outcome space


def outcome_point(scenario: Scenario, shares_a, discount_round: int = 1) -> OutcomePoint:
    """Map player A's kept shares to (u_A, u_B); round > 1 applies the discount."""
    x = np.asarray(shares_a, float)
    k = scenario.discount ** (discount_round - 1)
    return OutcomePoint(k * float(scenario.weights("A") @ x),
                        k * float(scenario.weights("B") @ (1.0 - x)))


def outcome_points(scenario: Scenario, shares_a) -> np.ndarray:
    """Vectorised :func:`outcome_point` at round 1; returns an (n, 2) array."""
    x = np.atleast_2d(np.asarray(shares_a, float))
    return np.column_stack([x @ scenario.weights("A"), (1.0 - x) @ scenario.weights("B")])


def pareto_frontier(scenario: Scenario) -> FrontierSpec:
    """Upper-right boundary of the image of the action cube.

    All ``2**m`` corners are mapped to outcome space in exact rational
    arithmetic; the frontier is the part of their upper convex hull running
    from the best point for B down to the best point for A.
    """
    wa = [Fraction(w) for w in scenario.weights_a]
    wb = [Fraction(w) for w in scenario.weights_b]
    if not any(wa) or not any(wb):
        raise ContractViolation("degenerate weights")
    m = len(wa)
    images = {}
    for bits in itertools.product((0, 1), repeat=m):
        p = (sum(w * b for w, b in zip(wa, bits)), sum(w * (1 - b) for w, b in zip(wb, bits)))
        images.setdefault(p, bits)

    pts = sorted(images)
    hull = []
    for p in pts:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= 0:
            hull.pop()
        hull.append(p)
    # Start at the top-most point (right-most among ties) and walk right.
    top = max(p[1] for p in hull)
    start = max(i for i, p in enumerate(hull) if p[1] == top)
    chain = hull[start:]

    segs = []
    for (x1, y1), (x2, y2) in zip(chain, chain[1:]):
        if x1 == x2:
            a, b, c = Fraction(1), Fraction(0), -x1
        else:
            a = -(y2 - y1) / (x2 - x1)
            b = Fraction(1)
            c = -(y1 + a * x1)
        segs.append(Segment(float(a), float(b), float(c), float(x1), float(x2)))
    if not segs:  # a single point: treat as a degenerate horizontal piece
        x1, y1 = chain[0]
        segs.append(Segment(0.0, 1.0, float(-y1), float(x1), float(x1)))
    return FrontierSpec(tuple(segs),
                        tuple(tuple(float(v) for v in images[p]) for p in chain),
                        tuple(OutcomePoint(float(p[0]), float(p[1])) for p in chain))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def frontier_distance(frontier: FrontierSpec, point) -> float:
    """Smallest point-to-line distance over the frontier's segment lines."""
    ua, ub = point
    return float(min(s.distance(ua, ub) for s in frontier.segments))


def _as_points(points) -> np.ndarray:
    return np.asarray([tuple(p) for p in points], float).reshape(-1, 2)


def frontier_distances(frontier: FrontierSpec, points) -> np.ndarray:
    p = _as_points(points)
    return np.min([s.distance(p[:, 0], p[:, 1]) for s in frontier.segments], axis=0)


def bid_distribution(points, frontier: FrontierSpec) -> float:
    """Mean distance of a set of outcome points to the Pareto frontier."""
    p = _as_points(points)
    if p.shape[0] == 0:
        raise ContractViolation("bid distribution of an empty set")
    return float(frontier_distances(frontier, p).mean())


def nash_distance(points, nash=NASH_POINT) -> float:
    """Mean Euclidean distance from outcome points to the Nash point."""
    p = _as_points(points)
    if p.shape[0] == 0:
        raise ContractViolation("Nash distance of an empty set")
    return float(np.hypot(p[:, 0] - nash[0], p[:, 1] - nash[1]).mean())


def nash_product(point) -> float:
    ua, ub = point
    return float(ua * ub)


def nash_solution(scenario: Scenario, grid_step: float = 0.01):
    """Grid search over player A's kept shares for the largest Nash product.

    Returns ``(shares, OutcomePoint)``; ties go to the first grid point in
    lexicographic order.
    """
    if not 0.0 < grid_step <= 0.5:
        raise ContractViolation("grid_step must lie in (0, 0.5]")
    n = int(round(1.0 / grid_step))
    axis = np.arange(n + 1) / n
    m = scenario.issue_count
    grid = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    pts = outcome_points(scenario, grid)
    prod = pts[:, 0] * pts[:, 1]
    best = int(np.argmax(prod))
    return grid[best].copy(), OutcomePoint(float(pts[best, 0]), float(pts[best, 1]))


# -- optimal stopping against a time-based opponent ------------------------

def opponent_marginal(c: float, T: float, P_res: float, t: float) -> float:
    """Time derivative of the opponent's decision utility."""
    if c <= 0:
        raise ContractViolation("concession factor must be positive")
    if t == 0 and c > 1:
        raise ContractViolation("marginal is singular at t = 0 when c > 1")
    if not 0 <= t <= T:
        raise ContractViolation(f"t={t} outside [0, {T}]")
    return -(1.0 - P_res) / (c * T ** (1.0 / c)) * t ** ((1.0 - c) / c)


def own_utility(c: float, d: float, T: float, t: float) -> float:
    """Normalised utility from accepting at time t: ``(t/T)**(1/c) * d**t`` (zero reserve)."""
    if t <= 0:
        raise ContractViolation("own utility is defined for t > 0")
    return (t / T) ** (1.0 / c) * d ** t


def own_marginal_utility(c: float, d: float, T: float, t: float) -> float:
    if t <= 0:
        raise ContractViolation("own utility is defined for t > 0")
    return own_utility(c, d, T, t) * (1.0 / (c * t) + math.log(d))


def optimal_stopping_time(c: float, d: float, T: float) -> float:
    """Stationary point ``-1 / (c ln d)`` capped at the deadline; ``d = 1`` gives T."""
    if c <= 0 or not 0 < d <= 1:
        raise ContractViolation("need c > 0 and d in (0, 1]")
    if d == 1.0:
        return float(T)
    t = -1.0 / (c * math.log(d))
    return float(T) if t > T else t


def second_time_derivative(c: float, d: float, T: float, t: float) -> float:
    ln = math.log(d)
    return d ** t / T ** (1.0 / c) * (
        ln ** 2 * t ** (1.0 / c)
        + 2.0 * ln / c * t ** ((1.0 - c) / c)
        + (1.0 - c) / c ** 2 * t ** ((1.0 - 2.0 * c) / c))


def nth_time_derivative(c: float, d: float, T: float, t: float, n: int) -> float:
    """General n-th derivative of the own-utility curve (binomial expansion)."""
    if n < 1:
        raise ContractViolation("n must be at least 1")
    if t <= 0:
        raise ContractViolation("derivatives are defined for t > 0")
    ln = math.log(d)
    total = 0.0
    prod = 1.0
    for i in range(n + 1):
        if i > 0:
            prod *= 1.0 - (i - 1) * c
        total += math.comb(n, i) * ln ** (n - i) / c ** i * prod * t ** ((1.0 - i * c) / c)
    return d ** t / T ** (1.0 / c) * total


def cumulative_accept_probability(per_step_accept: Sequence[float]) -> list:
    """Probability that the game stops exactly at each step."""
    out = []
    survive = 1.0
    for p in per_step_accept:
        if not 0.0 <= p <= 1.0:
            raise ContractViolation(f"{p} is not a probability")
        out.append(p * survive)
        survive *= 1.0 - p
    return out


def decision_utility_to_concession(u_d: float, t: float, T: float) -> float:
    """Concession factor ``ln(t/T) / ln(u_d)``.

    ``u_d`` here is the concession curve ``(t/T) ** (1/c)``, i.e. the share
    already conceded, so feeding back ``1 - decision_utility`` round-trips.
    """
    if not 0.0 < u_d < 1.0:
        raise ContractViolation("u_d must lie strictly inside (0, 1)")
    if not 0.0 < t < T:
        raise ContractViolation("t must lie strictly inside (0, T)")
    return math.log(t / T) / math.log(u_d)


def stopping_grid(cs: Iterable[float], ds: Iterable[float], T: float = 20) -> list:
    """Rows of (c, d, closed-form stop time, integer argmax of own utility)."""
    rows = []
    for c in cs:
        for d in ds:
            ts = np.arange(1, int(T) + 1)
            best = int(ts[np.argmax([own_utility(c, d, T, t) for t in ts])])
            rows.append((c, d, optimal_stopping_time(c, d, T), best))
    return rows


# -- backward induction -----------------------------------------------------

TERMINATE = "D"
CONTINUE = "C"


@dataclass
class GameTree:
    """Chain of alternating two-move decision nodes.

    ``payoffs[i]`` is what both players get if the mover at node ``i``
    terminates; ``final`` is paid when everybody continues. Node ``i`` is
    owned by player ``i % 2`` (0 = first mover).
    """

    payoffs: list
    final: tuple
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.payoffs = [tuple(float(v) for v in p) for p in self.payoffs]
        self.final = tuple(float(v) for v in self.final)

    @property
    def depth(self) -> int:
        return len(self.payoffs)

    def owner(self, i: int) -> int:
        return i % 2

    def play(self, actions: Sequence[str]) -> tuple:
        for i, a in enumerate(actions):
            if a == TERMINATE:
                return self.payoffs[i]
        return self.final


def backward_induction(tree: GameTree):
    """Solve from the last node back; ties resolve to terminating.

    Returns ``(actions, root_payoff)`` where ``actions[i]`` is the SPNE move
    at node ``i``.
    """
    value = tree.final
    actions = [CONTINUE] * tree.depth
    for i in reversed(range(tree.depth)):
        me = tree.owner(i)
        stop = tree.payoffs[i]
        if stop[me] >= value[me]:
            actions[i] = TERMINATE
            value = stop
    return actions, value


def strategy_profile(actions: Sequence[str]) -> tuple:
    """Split node actions into per-player sequences, e.g. (<D,D,D>, <D,D,D>)."""
    return tuple(actions[0::2]), tuple(actions[1::2])


def centipede_tree(rounds: int = 6, step: float = 1.0, keep: float = 0.9) -> GameTree:
    """Pie grows by ``step`` per node; a defector keeps ``keep`` of it, a full
    cooperation path splits the final pie evenly."""
    payoffs = []
    for i in range(rounds):
        pie = step * (i + 1)
        big, small = round(keep * pie, 12), round((1.0 - keep) * pie, 12)
        payoffs.append((big, small) if i % 2 == 0 else (small, big))
    pie = step * (rounds + 1)
    return GameTree(payoffs, (pie / 2, pie / 2))


def bargaining_tree(shares: Sequence[float], discount: float = 0.9) -> GameTree:
    """Alternating-offers game: ending at node i splits a pie of ``discount**i``,
    with ``shares[i]`` going to the first mover; running out pays (0, 0)."""
    payoffs = [(s * discount ** i, (1 - s) * discount ** i) for i, s in enumerate(shares)]
    return GameTree(payoffs, (0.0, 0.0))


# The six-node centipede with its printed payoffs.
FIG_CENTIPEDE = GameTree(
    [(0.9, 0.1), (0.2, 1.8), (2.7, 0.3), (0.4, 3.6), (4.5, 0.5), (0.6, 5.4)], (3.5, 3.5))


# -- gameplay summaries -------------------------------------------------------

@functools.lru_cache(maxsize=32)
def _nash_point(scenario: Scenario) -> OutcomePoint:
    step = 0.01 if scenario.issue_count <= 3 else 0.1
    return nash_solution(scenario, step)[1]


SUMMARY_COLUMNS = ("n_games", "d_nash", "bid_distribution", "mean_reward", "mean_time",
                   "acceptance_rate")


def game_summary(transcripts: Sequence, scenario: Scenario, player: str = "A") -> dict:
    """Evaluation columns over a batch of games.

    Geometry uses the undiscounted outcome points of accepted games; reward
    and time average over every game (a conflict counts as the deadline).
    Empty inputs yield NaN markers.
    """
    n = len(transcripts)
    nan = float("nan")
    if n == 0:
        return {"n_games": 0, "d_nash": nan, "bid_distribution": nan, "mean_reward": nan,
                "mean_time": nan, "acceptance_rate": nan}
    idx = 0 if player == "A" else 1
    accepted = [tr for tr in transcripts if tr.accepted]
    pts = outcome_points(scenario, [tr.final_offer.share_for("A") for tr in accepted]) \
        if accepted else np.empty((0, 2))
    frontier = pareto_frontier(scenario) if scenario.issue_count > 1 else None
    return {
        "n_games": n,
        "d_nash": nash_distance(pts, tuple(_nash_point(scenario))) if len(pts) else nan,
        "bid_distribution": bid_distribution(pts, frontier) if len(pts) and frontier else nan,
        "mean_reward": float(np.mean([tr.final_rewards[idx] for tr in transcripts])),
        "mean_time": float(np.mean([tr.end_round for tr in transcripts])),
        "acceptance_rate": len(accepted) / n,
    }
