"""Linear layers, losses, optimizers and numerical gradient bridges."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

BRIDGE_STEP = 1e-4


@dataclass
class LinearLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "LinearLayer":
        """Uniform in [-1/sqrt(in_dim), 1/sqrt(in_dim)] for weights and bias."""
        bound = 1.0 / math.sqrt(in_dim)
        w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        b = rng.uniform(-bound, bound, size=out_dim)
        return cls(w, b)


@dataclass
class StackCache:
    inputs: list[np.ndarray]
    stack_id: int


class LayerStack:
    """Chain of affine layers with no activations."""

    def __init__(self, layers: Sequence[LinearLayer]):
        layers = list(layers)
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"layer widths do not chain: {a.out_dim} -> {b.in_dim}")
        self.layers = layers

    @classmethod
    def init(cls, widths: Sequence[int], rng: np.random.Generator) -> "LayerStack":
        return cls([LinearLayer.init(a, b, rng) for a, b in zip(widths, widths[1:])])

    @classmethod
    def identity(cls, widths: Sequence[int]) -> "LayerStack":
        return cls(
            [LinearLayer(np.eye(b, a), np.zeros(b)) for a, b in zip(widths, widths[1:])]
        )

    @property
    def widths(self) -> list[int]:
        if not self.layers:
            return []
        return [self.layers[0].in_dim] + [l.out_dim for l in self.layers]

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out

    def copy(self) -> "LayerStack":
        return LayerStack([LinearLayer(l.weights.copy(), l.bias.copy()) for l in self.layers])


def stack_forward(stack: LayerStack, x: np.ndarray) -> tuple[np.ndarray, StackCache]:
    """Forward a vector or a (batch, in_dim) array; returns output and cache."""
    h = np.asarray(x, dtype=float)
    squeeze = h.ndim == 1
    h = np.atleast_2d(h)
    if h.shape[1] != stack.in_dim:
        raise ValueError(f"stack expects width {stack.in_dim}, got {h.shape[1]}")
    inputs = []
    for layer in stack.layers:
        inputs.append(h)
        h = h @ layer.weights.T + layer.bias
    cache = StackCache(inputs, id(stack))
    return (h[0] if squeeze else h), cache


def stack_backward(
    stack: LayerStack, cache: StackCache | None, upstream: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Reverse-mode gradients for :func:`stack_forward`.

    Returns gradients aligned with ``stack.params()`` and the input gradient.
    """
    if cache is None or cache.stack_id != id(stack) or len(cache.inputs) != len(stack.layers):
        raise ValueError("missing or stale forward cache for this stack")
    g = np.asarray(upstream, dtype=float)
    squeeze = g.ndim == 1
    g = np.atleast_2d(g)
    grads: list[np.ndarray] = []
    for layer, x in zip(reversed(stack.layers), reversed(cache.inputs)):
        grads = [g.T @ x, g.sum(axis=0)] + grads
        g = g @ layer.weights
    return grads, (g[0] if squeeze else g)


# ---------------------------------------------------------------------------
# losses


def mse_loss(x: np.ndarray, x_rec: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean of squared entries of ``x_rec - x`` and its gradient w.r.t. ``x_rec``."""
    x = np.asarray(x, dtype=float)
    x_rec = np.asarray(x_rec, dtype=float)
    if x.shape != x_rec.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_rec.shape}")
    diff = x_rec - x
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


CE_FLOOR = 1e-12


def cross_entropy_loss(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. ``probs``."""
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    labels = np.asarray(labels, dtype=int)
    n, C = probs.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= C:
        raise ValueError(f"labels must lie in [0, {C})")
    picked = probs[np.arange(n), labels] + CE_FLOOR
    grad = np.zeros_like(probs)
    grad[np.arange(n), labels] = -1.0 / (n * picked)
    return float(-np.mean(np.log(picked))), grad


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class OptimizerState:
    kind: str
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    alpha: float = 0.99
    eps: float = 1e-8
    step_count: int = 0
    first: list[np.ndarray] = field(default_factory=list)
    second: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("adam", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.kind!r}")


def make_optimizer(kind: str, lr: float | None = None, **hyper) -> OptimizerState:
    if lr is None:
        lr = 1e-3
    return OptimizerState(kind=kind, lr=lr, **hyper)


def optimizer_step(
    state: OptimizerState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]
) -> bool:
    """Update ``params`` in place.  Returns False (and skips) on non-finite gradients."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
    if not all(np.all(np.isfinite(g)) for g in grads):
        log.warning("non-finite gradient at step %d; update skipped", state.step_count + 1)
        return False
    if not state.second:
        state.first = [np.zeros_like(p) for p in params]
        state.second = [np.zeros_like(p) for p in params]
    state.step_count += 1
    t = state.step_count
    for p, g, m, v in zip(params, grads, state.first, state.second):
        if state.kind == "adam":
            m *= state.beta1
            m += (1 - state.beta1) * g
            v *= state.beta2
            v += (1 - state.beta2) * g * g
            m_hat = m / (1 - state.beta1**t)
            v_hat = v / (1 - state.beta2**t)
            p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        else:
            v *= state.alpha
            v += (1 - state.alpha) * g * g
            p -= state.lr * g / (np.sqrt(v) + state.eps)
    return True


# ---------------------------------------------------------------------------
# numerical gradients


def finite_diff_grad(
    f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = BRIDGE_STEP
) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x``, shape (out, in)."""
    x = np.asarray(x, dtype=float).ravel()
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fp = np.atleast_1d(np.asarray(f(x + e), dtype=float)).ravel()
        fm = np.atleast_1d(np.asarray(f(x - e), dtype=float)).ravel()
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise FloatingPointError(f"non-finite function value around coordinate {i}")
        cols.append((fp - fm) / (2.0 * h))
    return np.stack(cols, axis=1)


def parameter_shift_grad(expectation: Callable[[np.ndarray], float], theta: np.ndarray) -> np.ndarray:
    """Exact gradient for parameters that each drive one RY/RZ rotation."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    shift = np.pi / 2
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e.flat[k] = shift
        grad.flat[k] = 0.5 * (expectation(theta + e) - expectation(theta - e))
    return grad
