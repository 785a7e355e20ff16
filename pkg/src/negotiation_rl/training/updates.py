"""Actor-critic updates for the accept/categorical and offer networks.

Both losses are averaged over an episode's records and applied as one Adam
step. ``TD = R - V(s)`` is treated as a constant inside the actor loss, so the
actor and critic gradients meet only in the shared trunk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..neural.distributions import (entropy_grads, entropy_term, log_prob_grads,
                                    log_prob_per_issue, log_softmax, softmax_policy)
from ..neural.optim import adam_step
from ..protocol import ContractViolation

log = logging.getLogger(__name__)

COLLAPSE_FRACTION = 0.9


class DivergenceError(ContractViolation):
    """A loss or gradient became non-finite."""


@dataclass
class Losses:
    critic: float
    actor: float
    mean_sigma: tuple = ()
    collapsed: bool = False


def _finite(grads: dict) -> bool:
    return all(np.all(np.isfinite(g)) for g in grads.values())


def accept_net_gradients(net, states, actions, rewards):
    """Return ``(grads, Losses)`` for a logit-head net without touching parameters."""
    states = np.atleast_2d(states)
    actions = np.asarray(actions, int)
    rewards = np.asarray(rewards, float)
    n = len(actions)
    logits, values, cache = net.forward(states)
    td = rewards - values
    lsm = log_softmax(logits)
    logp = lsm[np.arange(n), actions]
    critic = float(np.mean(td ** 2))
    actor = float(np.mean(-logp * td))
    if not (np.isfinite(critic) and np.isfinite(actor)):
        raise DivergenceError("non-finite accept-net loss")
    onehot = np.zeros_like(logits)
    onehot[np.arange(n), actions] = 1.0
    d_logits = -(onehot - softmax_policy(logits)) * td[:, None] / n
    d_values = -2.0 * td / n
    return net.backward(cache, d_logits, d_values), Losses(critic, actor)


def accept_net_update(buffer, net, adam) -> Losses:
    """One Adam step on an episode of accept (or categorical offer) decisions."""
    if not len(buffer):
        raise ContractViolation("empty buffer")
    grads, losses = accept_net_gradients(net, buffer.states(), buffer.actions(), buffer.rewards())
    if not _finite(grads):
        raise DivergenceError("non-finite accept-net gradient")
    adam_step(adam, net.parameters(), grads)
    return losses


def offer_net_gradients(net, states, actions, rewards, entropy_form: str = "paper",
                        entropy_coef: float = 1.0):
    """Return ``(grads, Losses)`` for the continuous offer net."""
    states = np.atleast_2d(states)
    actions = np.atleast_2d(np.asarray(actions, float))
    rewards = np.asarray(rewards, float)
    n = len(rewards)
    params, values, cache = net.forward(states)
    td = rewards - values
    lp = log_prob_per_issue(params, actions)
    scale = params.scale
    ent = entropy_term(scale, entropy_form) if entropy_coef else np.zeros_like(lp)
    # One actor loss per issue head, summed.
    per_issue = -(lp + entropy_coef * np.asarray(ent)) * td[:, None]
    actor = float(per_issue.sum(axis=1).mean())
    critic = float(np.mean(td ** 2))
    if not (np.isfinite(critic) and np.isfinite(actor)):
        raise DivergenceError("non-finite offer-net loss")
    g1, g2 = log_prob_grads(params, actions)
    if entropy_coef:
        e1, e2 = entropy_grads(params, entropy_form)
        g1, g2 = g1 + entropy_coef * e1, g2 + entropy_coef * e2
    w = -td[:, None] / n
    grads = net.backward(cache, g1 * w, g2 * w, -2.0 * td / n)
    floor_hits = np.mean(scale <= getattr(net, "scale_floor", 0.0) * 1.01) if net.kind != "beta" else 0.0
    return grads, Losses(critic, actor, tuple(float(s) for s in scale.mean(axis=0)),
                         bool(floor_hits > COLLAPSE_FRACTION))


def offer_net_update(buffer, net, adam, entropy_form: str = "paper",
                     entropy_coef: float = 1.0) -> Losses:
    if not len(buffer):
        raise ContractViolation("empty buffer")
    grads, losses = offer_net_gradients(net, buffer.states(), buffer.actions(),
                                        buffer.rewards(), entropy_form, entropy_coef)
    if not _finite(grads):
        raise DivergenceError("non-finite offer-net gradient")
    if losses.collapsed:
        log.warning("variance collapse: scales at the floor for most steps")
    adam_step(adam, net.parameters(), grads)
    return losses
