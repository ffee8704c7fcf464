"""Minimal dense-network machinery on flat float64 parameter vectors.

Networks are described as named chains of dense layers packed into a single
flat vector, which keeps checkpoints trivial (one array plus metadata) and
makes finite-difference gradient checks direct. Forward passes cache layer
inputs and pre-activations; backward passes accumulate into a flat gradient
of the same length. Optimization is plain Adam with optional global-norm
gradient clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DenseSpec:
    """One dense layer: y = act(W x + b), W shape (out_dim, in_dim)."""

    in_dim: int
    out_dim: int
    activation: str = "relu"  # "relu" or "linear"
    zero_init: bool = False

    def __post_init__(self):
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dims must be positive")

    @property
    def size(self):
        return (self.in_dim + 1) * self.out_dim


def _orthogonal(rows, cols, gain, rng):
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix column signs so the draw is well-defined
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class ChainSet:
    """Named dense chains sharing one flat parameter vector.

    Layout per layer: W row-major, then b. Chain order follows the dict
    insertion order, so layouts are stable for checkpointing.
    """

    def __init__(self, chains: dict):
        self.chains = dict(chains)
        self._slices = {}
        offset = 0
        for name, specs in self.chains.items():
            for i, spec in enumerate(specs):
                w_size = spec.in_dim * spec.out_dim
                self._slices[(name, i)] = (
                    slice(offset, offset + w_size),
                    slice(offset + w_size, offset + w_size + spec.out_dim),
                )
                offset += spec.size
        self.size = offset

    def init_theta(self, rng):
        """Orthogonal weights (gain sqrt(2) before relu, 1 otherwise), zero biases."""
        theta = np.zeros(self.size)
        for name, specs in self.chains.items():
            for i, spec in enumerate(specs):
                w_slice, _ = self._slices[(name, i)]
                if spec.zero_init:
                    continue
                gain = math.sqrt(2.0) if spec.activation == "relu" else 1.0
                theta[w_slice] = _orthogonal(spec.out_dim, spec.in_dim, gain, rng).ravel()
        return theta

    def weights(self, theta, name, i):
        spec = self.chains[name][i]
        w_slice, b_slice = self._slices[(name, i)]
        return theta[w_slice].reshape(spec.out_dim, spec.in_dim), theta[b_slice]

    def forward(self, theta, name, x):
        """Run chain `name` on batch x (N, in_dim); returns (y, cache) for backward."""
        cache = []
        for i, spec in enumerate(self.chains[name]):
            w, b = self.weights(theta, name, i)
            z = x @ w.T + b
            cache.append((x, z))
            x = np.maximum(z, 0.0) if spec.activation == "relu" else z
        return x, cache

    def backward(self, theta, name, cache, dy, grad):
        """Backprop dy through chain `name`, accumulating into flat `grad`; returns dx."""
        for i in range(len(self.chains[name]) - 1, -1, -1):
            spec = self.chains[name][i]
            x, z = cache[i]
            dz = dy * (z > 0.0) if spec.activation == "relu" else dy
            w_slice, b_slice = self._slices[(name, i)]
            w = theta[w_slice].reshape(spec.out_dim, spec.in_dim)
            grad[w_slice] += (dz.T @ x).ravel()
            grad[b_slice] += dz.sum(axis=0)
            dy = dz @ w
        return dy


@dataclass
class FlatParams:
    """Flat parameter vector with its Adam accumulators."""

    theta: np.ndarray
    adam_m: np.ndarray = field(default=None)
    adam_v: np.ndarray = field(default=None)
    adam_step: int = 0

    def __post_init__(self):
        if self.adam_m is None:
            self.adam_m = np.zeros_like(self.theta)
        if self.adam_v is None:
            self.adam_v = np.zeros_like(self.theta)

    def copy(self):
        return FlatParams(self.theta.copy(), self.adam_m.copy(), self.adam_v.copy(), self.adam_step)


def clip_grad_norm(grad, max_norm):
    """Scale grad down to global L2 norm max_norm; no-op when already within."""
    norm = float(np.linalg.norm(grad))
    if max_norm > 0 and norm > max_norm:
        return grad * (max_norm / norm), norm
    return grad, norm


def adam_step(params: FlatParams, grad, lr, eps, beta1=0.9, beta2=0.999) -> FlatParams:
    """One Adam update; returns a fresh FlatParams, inputs untouched."""
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient in adam_step")
    t = params.adam_step + 1
    m = beta1 * params.adam_m + (1.0 - beta1) * grad
    v = beta2 * params.adam_v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    theta = params.theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return FlatParams(theta, m, v, t)
