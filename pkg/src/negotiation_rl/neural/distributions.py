"""Stochastic policy heads: Normal, Cauchy, Beta and categorical.

Each continuous head is diagonal: issues are sampled independently and the
joint log-density is the sum over issues. Gradients of the log-density with
respect to the head outputs are given in closed form so the networks can
back-propagate without an autodiff engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import betaln, digamma

from ..protocol import ContractViolation

LOG_2PI = math.log(2.0 * math.pi)
KINDS = ("normal", "cauchy", "beta", "categorical")


class OutOfSupport(ContractViolation):
    """A Beta log-density was requested outside (0, 1)."""


def softmax_policy(logits):
    """Row-wise softmax with max subtraction."""
    h = np.asarray(logits, float)
    z = h - h.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    h = np.asarray(logits, float)
    z = h - h.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class DistributionParams:
    """Head outputs for one or more states (rows) and ``m`` issues (columns).

    ``first``/``second`` are (location, scale) for normal and cauchy, (alpha,
    beta) for beta; categorical uses ``logits`` only.
    """

    kind: str
    first: Optional[np.ndarray] = None
    second: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown distribution {self.kind!r}")
        if self.kind == "categorical":
            if self.logits is None:
                raise ContractViolation("categorical head needs logits")
            return
        self.first = np.atleast_2d(np.asarray(self.first, float))
        self.second = np.atleast_2d(np.asarray(self.second, float))
        if np.any(self.second <= 0) or (self.kind == "beta" and np.any(self.first <= 0)):
            raise ContractViolation("scales and beta shapes must be strictly positive")

    @property
    def scale(self) -> np.ndarray:
        """Spread used by the entropy bonus: the scale, or the Beta std."""
        if self.kind == "beta":
            return np.sqrt(beta_moments(self.first, self.second)[1])
        return self.second


def sample(params: DistributionParams, rng: np.random.Generator) -> np.ndarray:
    k = params.kind
    if k == "categorical":
        p = softmax_policy(params.logits)
        p2 = np.atleast_2d(p)
        u = rng.random(p2.shape[0])
        idx = (p2.cumsum(axis=1) < u[:, None]).sum(axis=1)
        idx = np.minimum(idx, p2.shape[1] - 1)
        return idx if np.ndim(params.logits) > 1 else int(idx[0])
    if k == "normal":
        return params.first + params.second * rng.standard_normal(params.first.shape)
    if k == "cauchy":
        return params.first + params.second * rng.standard_cauchy(params.first.shape)
    x = rng.beta(params.first, params.second)
    return np.clip(x, 1e-12, 1.0 - 1e-12)


def log_prob_per_issue(params: DistributionParams, action) -> np.ndarray:
    a = np.atleast_2d(np.asarray(action, float))
    k = params.kind
    if k == "normal":
        mu, s = params.first, params.second
        return -np.log(s) - 0.5 * LOG_2PI - 0.5 * ((a - mu) / s) ** 2
    if k == "cauchy":
        mu, g = params.first, params.second
        z = (a - mu) / g
        return -np.log(math.pi * g) - np.log1p(z * z)
    if k == "beta":
        if np.any((a <= 0) | (a >= 1)):
            raise OutOfSupport("beta density is only defined on (0, 1)")
        al, be = params.first, params.second
        return (al - 1) * np.log(a) + (be - 1) * np.log1p(-a) - betaln(al, be)
    raise ContractViolation("use categorical_log_prob for discrete heads")


def log_prob(params: DistributionParams, action):
    """Joint log-density (or log-probability) of ``action``; one value per row."""
    if params.kind == "categorical":
        return categorical_log_prob(params.logits, action)
    lp = log_prob_per_issue(params, action).sum(axis=1)
    return lp if lp.shape[0] > 1 else float(lp[0])


def categorical_log_prob(logits, action):
    lsm = log_softmax(np.atleast_2d(logits))
    idx = np.atleast_1d(np.asarray(action, int))
    out = lsm[np.arange(lsm.shape[0]), idx]
    return out if out.shape[0] > 1 else float(out[0])


def log_prob_grads(params: DistributionParams, action):
    """Per-issue derivatives of the log-density w.r.t. (first, second)."""
    a = np.atleast_2d(np.asarray(action, float))
    k = params.kind
    if k == "normal":
        mu, s = params.first, params.second
        r = a - mu
        return r / s ** 2, -1.0 / s + r ** 2 / s ** 3
    if k == "cauchy":
        mu, g = params.first, params.second
        z = (a - mu) / g
        q = 1.0 + z * z
        return 2.0 * z / (g * q), -1.0 / g + 2.0 * z * z / (g * q)
    if k == "beta":
        al, be = params.first, params.second
        ab = digamma(al + be)
        return np.log(a) - digamma(al) + ab, np.log1p(-a) - digamma(be) + ab
    raise ContractViolation("categorical gradients come from softmax directly")


def beta_moments(alpha, beta):
    """Mean ``a / (a + b)`` and variance ``a b / ((a + b)^2 (a + b + 1))``."""
    alpha = np.asarray(alpha, float)
    beta = np.asarray(beta, float)
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise ContractViolation("beta shapes must be positive")
    s = alpha + beta
    mean = alpha / s
    var = alpha * beta / (s * s * (s + 1.0))
    if mean.ndim == 0:
        return float(mean), float(var)
    return mean, var


ENTROPY_FORMS = ("paper", "gaussian")


def entropy_term(sigma, form: str = "paper"):
    """Exploration bonus added to the log-density in the offer loss.

    ``paper``: ``0.5 + log(2 pi) * log(sigma)``, taken verbatim.
    ``gaussian``: the differential entropy ``0.5 * log(2 pi e sigma^2)``.
    """
    s = np.asarray(sigma, float)
    if np.any(s <= 0):
        raise ContractViolation("entropy needs a positive scale")
    if form == "paper":
        out = 0.5 + LOG_2PI * np.log(s)
    elif form == "gaussian":
        out = 0.5 * (LOG_2PI + 1.0) + np.log(s)
    else:
        raise ContractViolation(f"unknown entropy form {form!r}")
    return float(out) if out.ndim == 0 else out


def entropy_grad(sigma, form: str = "paper"):
    s = np.asarray(sigma, float)
    return (LOG_2PI if form == "paper" else 1.0) / s


def entropy_grads(params: DistributionParams, form: str = "paper"):
    """Derivatives of the entropy bonus w.r.t. (first, second), per issue."""
    if params.kind in ("normal", "cauchy"):
        return np.zeros_like(params.first), entropy_grad(params.second, form)
    if params.kind == "beta":
        al, be = params.first, params.second
        s = al + be
        # d log(std) = 0.5 d log(var); both forms are linear in log(std).
        k = LOG_2PI if form == "paper" else 1.0
        dlog_a = 0.5 * (1.0 / al - 2.0 / s - 1.0 / (s + 1.0))
        dlog_b = 0.5 * (1.0 / be - 2.0 / s - 1.0 / (s + 1.0))
        return k * dlog_a, k * dlog_b
    raise ContractViolation("no entropy bonus for categorical heads")


def cauchy_cdf(x, loc, scale):
    return 0.5 + np.arctan((np.asarray(x, float) - loc) / scale) / math.pi
