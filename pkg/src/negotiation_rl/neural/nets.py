"""Accept Net and Offer Net: shared trunks with actor and value heads."""

from __future__ import annotations

import numpy as np

from ..protocol import ContractViolation
from .distributions import DistributionParams
from .layers import LayerStack

HEAD_KINDS = ("normal", "cauchy", "beta")
SCALE_FLOOR = 1e-3
BETA_OFFSET = 1.0


class _Net:
    """Common parameter bookkeeping; subclasses list their stacks."""

    def stacks(self):
        raise NotImplementedError

    def parameters(self) -> dict:
        out = {}
        for name, stack in self.stacks():
            out.update(dict(stack.named_parameters(name)))
        return out

    def load_parameters(self, values: dict) -> None:
        params = self.parameters()
        if set(values) != set(params):
            raise ContractViolation("parameter names do not match the architecture")
        for k, p in params.items():
            v = np.asarray(values[k], float)
            if v.shape != p.shape:
                raise ContractViolation(f"shape mismatch for {k}: {v.shape} vs {p.shape}")
            p[...] = v

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())


class AcceptNet(_Net):
    """Two affine-ReLU6 pairs shared by a logit head and a value head.

    With ``n_actions=2`` this is the accept/reject policy; the same shape
    doubles as the categorical offer policy of the mini-games.
    """

    def __init__(self, input_dim: int, hidden: int = 512, n_actions: int = 2,
                 rng: np.random.Generator | None = None, out_gain: float = 0.1):
        self.input_dim, self.hidden, self.n_actions = input_dim, hidden, n_actions
        self.base = LayerStack([input_dim, hidden, hidden], ["relu6", "relu6"], rng)
        self.actor = LayerStack([hidden, n_actions], ["none"], rng, out_gain=out_gain)
        self.value = LayerStack([hidden, 1], ["none"], rng, out_gain=out_gain)

    def stacks(self):
        return [("base", self.base), ("actor", self.actor), ("value", self.value)]

    def architecture(self) -> dict:
        return {"net": "accept", "input_dim": self.input_dim, "hidden": self.hidden,
                "n_actions": self.n_actions}

    def forward(self, x):
        h, cb = self.base.forward(x)
        logits, ca = self.actor.forward(h)
        v, cv = self.value.forward(h)
        return logits, v[:, 0], (cb, ca, cv)

    def backward(self, cache, d_logits, d_values) -> dict:
        cb, ca, cv = cache
        ga, dh_a = self.actor.backward(ca, d_logits)
        gv, dh_v = self.value.backward(cv, np.asarray(d_values, float).reshape(-1, 1))
        gb, _ = self.base.backward(cb, dh_a + dh_v)
        grads = {}
        grads.update(LayerStack.named_grads("base", gb))
        grads.update(LayerStack.named_grads("actor", ga))
        grads.update(LayerStack.named_grads("value", gv))
        return grads


class OfferNet(_Net):
    """Shared trunk feeding a seven-layer value stack and 2m parameter heads.

    Location/alpha heads are affine-ReLU6, affine-ReLU6, affine-out; scale/beta
    heads are affine-ReLU6, affine-out. The output activation is a sigmoid for
    Normal and Cauchy and a ReLU plus ``beta_offset`` for Beta. Scales carry a
    ``scale_floor`` so they never reach zero.
    """

    def __init__(self, input_dim: int, kind: str = "normal", issues: int = 3,
                 hidden: int = 256, head_hidden: int = 64, value_hidden: int = 64,
                 rng: np.random.Generator | None = None, out_gain: float = 0.1,
                 scale_floor: float = SCALE_FLOOR, beta_offset: float = BETA_OFFSET):
        if kind not in HEAD_KINDS:
            raise ContractViolation(f"head kind must be one of {HEAD_KINDS}, got {kind!r}")
        self.input_dim, self.kind, self.issues = input_dim, kind, issues
        self.hidden, self.head_hidden, self.value_hidden = hidden, head_hidden, value_hidden
        self.scale_floor, self.beta_offset = scale_floor, beta_offset
        out_act = "relu" if kind == "beta" else "sigmoid"
        self.base = LayerStack([input_dim, hidden, hidden], ["relu6", "relu6"], rng)
        self.value = LayerStack([hidden] + [value_hidden] * 7 + [1],
                                ["relu6"] * 7 + ["none"], rng, out_gain=out_gain)
        self.first = [LayerStack([hidden, head_hidden, head_hidden, 1],
                                 ["relu6", "relu6", out_act], rng, out_gain=out_gain)
                      for _ in range(issues)]
        self.second = [LayerStack([hidden, head_hidden, 1], ["relu6", out_act], rng,
                                  out_gain=out_gain)
                       for _ in range(issues)]
        if kind == "beta" and rng is not None:
            # A ReLU output starting below zero has no gradient; start the
            # final biases slightly positive so every head is live.
            for s in self.first + self.second:
                s.biases[-1][:] = 0.1

    def stacks(self):
        out = [("base", self.base), ("value", self.value)]
        out += [(f"first{i}", s) for i, s in enumerate(self.first)]
        out += [(f"second{i}", s) for i, s in enumerate(self.second)]
        return out

    def architecture(self) -> dict:
        return {"net": "offer", "input_dim": self.input_dim, "kind": self.kind,
                "issues": self.issues, "hidden": self.hidden,
                "head_hidden": self.head_hidden, "value_hidden": self.value_hidden,
                "scale_floor": self.scale_floor, "beta_offset": self.beta_offset}

    def forward(self, x):
        h, cb = self.base.forward(x)
        v, cv = self.value.forward(h)
        f_out, f_cache = zip(*(s.forward(h) for s in self.first))
        s_out, s_cache = zip(*(s.forward(h) for s in self.second))
        first = np.hstack(f_out)
        second = np.hstack(s_out)
        if self.kind == "beta":
            first = first + self.beta_offset
            second = second + self.beta_offset
        else:
            second = second + self.scale_floor
        params = DistributionParams(self.kind, first, second)
        return params, v[:, 0], (cb, cv, f_cache, s_cache)

    def backward(self, cache, d_first, d_second, d_values) -> dict:
        """Gradients of a scalar loss given its derivatives w.r.t. head outputs.

        The offset and floor are additive constants, so derivatives w.r.t.
        ``first``/``second`` pass straight through to the stacks.
        """
        cb, cv, f_cache, s_cache = cache
        d_first = np.atleast_2d(d_first)
        d_second = np.atleast_2d(d_second)
        grads = {}
        gv, dh = self.value.backward(cv, np.asarray(d_values, float).reshape(-1, 1))
        grads.update(LayerStack.named_grads("value", gv))
        for i, (s, c) in enumerate(zip(self.first, f_cache)):
            g, d = s.backward(c, d_first[:, i:i + 1])
            grads.update(LayerStack.named_grads(f"first{i}", g))
            dh = dh + d
        for i, (s, c) in enumerate(zip(self.second, s_cache)):
            g, d = s.backward(c, d_second[:, i:i + 1])
            grads.update(LayerStack.named_grads(f"second{i}", g))
            dh = dh + d
        gb, _ = self.base.backward(cb, dh)
        grads.update(LayerStack.named_grads("base", gb))
        return grads


def build_accept_net(input_dim: int, rng: np.random.Generator | None = None,
                     hidden: int = 512, n_actions: int = 2, out_gain: float = 0.1) -> AcceptNet:
    if input_dim not in (2, 4):
        raise ContractViolation("accept net input is 2 (univariate) or 4 (multivariate)")
    return AcceptNet(input_dim, hidden, n_actions, rng, out_gain)


def build_offer_net(input_dim: int, head_kind: str = "normal",
                    rng: np.random.Generator | None = None, **kwargs) -> OfferNet:
    return OfferNet(input_dim, head_kind, rng=rng, **kwargs)


def net_from_architecture(arch: dict):
    """Rebuild an (unseeded, zero-weight) net from its ``architecture()`` dict."""
    arch = dict(arch)
    kind = arch.pop("net", None)
    if kind == "accept":
        return AcceptNet(rng=None, **arch)
    if kind == "offer":
        return OfferNet(rng=None, **arch)
    raise ContractViolation(f"unknown network type {kind!r}")
