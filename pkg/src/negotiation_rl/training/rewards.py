"""Terminal reward scheme shared by every training loop."""

from __future__ import annotations

from ..protocol import PLAYERS, Scenario, Transcript, utility

DEFAULT_K = 1.0


def assign_rewards(transcript: Transcript, scenario: Scenario, K: float = DEFAULT_K) -> tuple:
    """Discounted utility of the agreed division for each player, or ``(-K, -K)``.

    The discount ``delta ** (t_f - 1)`` is applied at the acceptance round.
    """
    if not transcript.accepted:
        return (-float(K), -float(K))
    t = transcript.end_round
    return tuple(utility(scenario, transcript.final_offer, t, p) for p in PLAYERS)


def penalty_rewards(K: float = DEFAULT_K):
    """Reward function for :func:`run_negotiation` with conflict penalty ``K``."""
    def fn(transcript, scenario):
        return assign_rewards(transcript, scenario, K)
    return fn
