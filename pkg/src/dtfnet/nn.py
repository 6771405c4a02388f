"""Small fully connected networks with hand-written backprop and Adam."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DataError, NumericalError, atomic_write_text


class ShapeMismatch(DataError):
    pass


class NonFiniteGradient(NumericalError):
    pass


@dataclass
class Mlp:
    """tanh hidden layers, identity output. ``weights[k]`` has shape (out, in)."""

    sizes: list
    weights: list
    biases: list

    @classmethod
    def init(cls, sizes, rng, out_scale: float = 1.0) -> "Mlp":
        """Xavier-uniform weights, zero biases. ``out_scale`` shrinks the last layer."""
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ShapeMismatch(f"invalid layer sizes {sizes}")
        weights, biases = [], []
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            limit = np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-limit, limit, size=(n_out, n_in))
            if k == len(sizes) - 2:
                w *= out_scale
            weights.append(w)
            biases.append(np.zeros(n_out))
        return cls(sizes, weights, biases)

    @classmethod
    def zeros(cls, sizes) -> "Mlp":
        sizes = [int(s) for s in sizes]
        return cls(
            sizes,
            [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
            [np.zeros(o) for o in sizes[1:]],
        )

    @property
    def params(self) -> list:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "Mlp":
        return Mlp(list(self.sizes), [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_from(self, other: "Mlp") -> None:
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def __call__(self, x):
        return mlp_forward(self, x)[0]

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc) -> "Mlp":
        sizes = [int(s) for s in doc["sizes"]]
        weights = [
            np.asarray(w, dtype=np.float64).reshape(o, i)
            for w, i, o in zip(doc["weights"], sizes[:-1], sizes[1:])
        ]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        return cls(sizes, weights, biases)

    def save(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "Mlp":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def mlp_forward(model: Mlp, x):
    """Forward pass for a single vector or a (batch, in) matrix.

    Returns ``(output, cache)``; the cache holds every layer's activations.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.sizes[0]:
        raise ShapeMismatch(f"input width {x.shape[-1]} != {model.sizes[0]}")
    acts = [x]
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w.T + b
        acts.append(z if k == last else np.tanh(z))
    return acts[-1], acts


def mlp_backward(model: Mlp, cache, grad_out):
    """Reverse-mode gradients of ``sum(output * grad_out)``.

    Returns ``(param_grads, grad_input)`` with ``param_grads`` ordered like
    :attr:`Mlp.params`. Batched caches sum gradients over the batch.
    """
    grad = np.asarray(grad_out, dtype=np.float64)
    if grad.shape != cache[-1].shape:
        raise ShapeMismatch(f"grad_out shape {grad.shape} != output shape {cache[-1].shape}")
    grads = []
    for k in range(len(model.weights) - 1, -1, -1):
        a_in = cache[k]
        if grad.ndim == 1:
            gw = np.outer(grad, a_in)
            gb = grad.copy()
        else:
            gw = grad.T @ a_in
            gb = grad.sum(axis=0)
        grads.append(gb)
        grads.append(gw)
        grad = grad @ model.weights[k]
        if k > 0:
            grad = grad * (1.0 - cache[k] ** 2)
    grads.reverse()
    return grads, grad


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: Mlp) -> "AdamState":
        return cls([np.zeros_like(p) for p in model.params], [np.zeros_like(p) for p in model.params])


def adam_step(model: Mlp, grads, state: AdamState, lr: float, max_norm: float | None = None) -> None:
    """Bias-corrected Adam update in place. ``max_norm`` clips the global gradient norm."""
    params = model.params
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ShapeMismatch("gradient shapes do not match model parameters")
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NonFiniteGradient("gradient contains NaN or Inf")
    if max_norm is not None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if norm > max_norm:
            grads = [g * (max_norm / norm) for g in grads]
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def softmax_logits(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
