"""Finite-difference checks shared by the unit and acceptance suites."""

import numpy as np

from negotiation_rl.neural.distributions import entropy_term, log_prob_per_issue, log_softmax, sample
from negotiation_rl.neural.nets import AcceptNet, OfferNet
from negotiation_rl.training.updates import accept_net_gradients, offer_net_gradients

RTOL, ATOL = 1e-4, 1e-6


def accept_surrogate(net, states, actions, rewards, td0):
    logits, values, _ = net.forward(states)
    lp = log_softmax(logits)[np.arange(len(actions)), actions]
    return np.mean((rewards - values) ** 2) + np.mean(-lp * td0)


def offer_surrogate(net, states, actions, rewards, td0, form, coef):
    params, values, _ = net.forward(states)
    lp = log_prob_per_issue(params, actions)
    ent = entropy_term(params.scale, form) if coef else 0.0
    return np.mean((rewards - values) ** 2) + np.mean((-(lp + coef * ent) * td0[:, None]).sum(axis=1))


def check_net(net, loss, analytic, h=1e-6, rtol=RTOL, atol=ATOL, per_tensor=None, rng=None):
    """Compare ``analytic`` grads with central differences of ``loss()``; return worst excess.

    ``per_tensor`` limits the check to that many random coordinates of each
    parameter tensor (drawn from ``rng``); by default every coordinate is probed.
    """
    worst = 0.0
    for key, p in net.parameters().items():
        g = analytic[key]
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        idx = range(flat.size)
        if per_tensor is not None and flat.size > per_tensor:
            idx = rng.choice(flat.size, per_tensor, replace=False)
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            fp = loss()
            flat[i] = old - h
            fm = loss()
            flat[i] = old
            fd = (fp - fm) / (2 * h)
            tol = atol + rtol * max(abs(fd), abs(gflat[i]))
            worst = max(worst, abs(fd - gflat[i]) / tol)
    return worst


def kink_margin(net, states):
    """Smallest distance of any ReLU/ReLU6 pre-activation to a corner."""
    stacks = dict(net.stacks())
    h, cache = stacks.pop("base").forward(states)
    caches = [(net.base, cache)] + [(st, st.forward(h)[1]) for st in stacks.values()]
    margin = np.inf
    for stack, layers in caches:
        for act, (_, z, _) in zip(stack.activations, layers):
            if act == "relu":
                margin = min(margin, np.abs(z).min())
            elif act == "relu6":
                margin = min(margin, np.abs(z).min(), np.abs(z - 6.0).min())
    return margin


def _smooth_draw(make_net, rng, shape, margin, tries=1000):
    # Central differences straddling a ReLU corner measure a one-sided slope,
    # so redraw until every pre-activation sits clear of the corners. A layer
    # that is dead for every input pins the next one at zero, hence the new net.
    for _ in range(tries):
        net = make_net()
        states = rng.random(shape)
        if kink_margin(net, states) > margin:
            return net, states
    raise RuntimeError("could not draw a smooth instance")


def random_accept_case(rng, input_dim=4, hidden=6, n_actions=2, batch=3, margin=1e-4):
    net, states = _smooth_draw(lambda: AcceptNet(input_dim, hidden, n_actions, rng, out_gain=1.0),
                               rng, (batch, input_dim), margin)
    actions = rng.integers(0, n_actions, batch)
    rewards = rng.normal(0, 2, batch)
    grads, _ = accept_net_gradients(net, states, actions, rewards)
    td0 = rewards - net.forward(states)[1]
    return net, (lambda: accept_surrogate(net, states, actions, rewards, td0)), grads


def random_offer_case(rng, kind, form="paper", coef=1.0, issues=3, batch=3, margin=1e-4):
    def make():
        return OfferNet(issues + 1, kind, issues=issues, hidden=6, head_hidden=4,
                        value_hidden=4, rng=rng, out_gain=1.0)
    net, states = _smooth_draw(make, rng, (batch, issues + 1), margin)
    params, values, _ = net.forward(states)
    actions = sample(params, rng)
    rewards = rng.normal(0, 2, batch)
    grads, _ = offer_net_gradients(net, states, actions, rewards, form, coef)
    td0 = rewards - values
    return net, (lambda: offer_surrogate(net, states, actions, rewards, td0, form, coef)), grads
