"""Affine layers with hand-written backpropagation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..protocol import ContractViolation

ACTIVATIONS = ("relu", "relu6", "sigmoid", "none")


def relu6(z):
    return np.clip(z, 0.0, 6.0)


def sigmoid(z):
    # Split by sign so exp never overflows.
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(kind: str, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "relu6":
        return relu6(z)
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "none":
        return z
    raise ContractViolation(f"unknown activation {kind!r}")


def activation_grad(kind: str, z, y):
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "relu6":
        return ((z > 0) & (z < 6)).astype(float)
    if kind == "sigmoid":
        return y * (1.0 - y)
    return np.ones_like(z)


class LayerStack:
    """Chain of ``affine -> activation`` pairs.

    Parameters live in ``weights`` (``(fan_in, fan_out)`` matrices) and
    ``biases``. ``forward`` works on a batch of row vectors and returns a cache
    that ``backward`` consumes; neither mutates parameters.
    """

    def __init__(self, sizes: Sequence[int], activations: Sequence[str],
                 rng: np.random.Generator | None = None, out_gain: float = 1.0):
        if len(activations) != len(sizes) - 1:
            raise ContractViolation("need one activation per affine layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ContractViolation(f"unknown activation {a!r}")
        self.sizes = list(sizes)
        self.activations = list(activations)
        self.weights, self.biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            if rng is None:
                W = np.zeros((fan_in, fan_out))
            else:
                # He-style uniform bound; the last layer can be shrunk so
                # fresh policies start close to uniform.
                bound = np.sqrt(6.0 / fan_in)
                if i == len(sizes) - 2:
                    bound *= out_gain
                W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.weights.append(W)
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def output_dim(self) -> int:
        return self.sizes[-1]

    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        if x.shape[1] != self.input_dim:
            raise ContractViolation(f"expected input width {self.input_dim}, got {x.shape[1]}")
        cache = []
        for W, b, act in zip(self.weights, self.biases, self.activations):
            z = x @ W + b
            y = activate(act, z)
            cache.append((x, z, y))
            x = y
        return x, cache

    def backward(self, cache, grad_out):
        """Return ``(param_grads, grad_input)``; param_grads pairs (dW, db) per layer."""
        g = np.asarray(grad_out, float)
        grads = [None] * len(cache)
        for i in reversed(range(len(cache))):
            x, z, y = cache[i]
            gz = g * activation_grad(self.activations[i], z, y)
            grads[i] = (x.T @ gz, gz.sum(axis=0))
            g = gz @ self.weights[i].T
        return grads, g

    def named_parameters(self, prefix: str):
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            yield f"{prefix}.{i}.W", W
            yield f"{prefix}.{i}.b", b

    @staticmethod
    def named_grads(prefix: str, grads):
        for i, (dW, db) in enumerate(grads):
            yield f"{prefix}.{i}.W", dW
            yield f"{prefix}.{i}.b", db


def identity_stack(dim: int) -> LayerStack:
    """Single linear layer initialised to the identity map."""
    s = LayerStack([dim, dim], ["none"])
    s.weights[0][:] = np.eye(dim)
    return s
