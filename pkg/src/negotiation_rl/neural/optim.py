"""Adam with bias correction, operating on a dict of named numpy arrays."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..protocol import ContractViolation

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    lr: float
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, lr: float) -> "AdamState":
        return cls(lr=lr,
                   m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """Update ``params`` in place and return them.

    Keys missing from ``grads`` are treated as zero gradient, so their
    moments still decay.
    """
    state.step += 1
    t = state.step
    step_size = state.lr / (1.0 - BETA1 ** t)
    inv_c2 = 1.0 / math.sqrt(1.0 - BETA2 ** t)
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            g = np.zeros_like(p)
        elif np.shape(g) != p.shape:
            raise ContractViolation(f"gradient shape {np.shape(g)} != {p.shape} for {k}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        sq = np.multiply(g, g)
        sq *= 1.0 - BETA2
        v += sq
        if step_size != 0.0:
            # sq is reused as the denominator sqrt(v_hat) + eps.
            np.sqrt(v, out=sq)
            sq *= inv_c2
            sq += EPS
            np.divide(m, sq, out=sq)
            sq *= step_size
            p -= sq
    return params
