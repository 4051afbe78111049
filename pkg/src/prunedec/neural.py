"""Masked multilayer perceptron decoder with manual backpropagation and Adam.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch of row
vectors propagates as ``x @ W + b``.  Every weight matrix has a companion
0/1 mask; the effective weight is ``W * mask``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import STREAM_INIT, make_rng

LOSS_EPS = 1e-12


class ContractError(ValueError):
    """Raised when arguments violate an operation's preconditions."""


def validate_layer_dims(layer_dims, n: int | None = None) -> tuple[int, ...]:
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ContractError(f"invalid layer dims {dims}")
    if dims[0] != dims[-1]:
        raise ContractError(f"input and output widths must match, got {dims}")
    if n is not None and dims[0] != n:
        raise ContractError(f"layer dims {dims} do not match code length {n}")
    return dims


@dataclass
class MaskedMlp:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    masks: list[np.ndarray]
    init_weights: list[np.ndarray]
    init_biases: list[np.ndarray]
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.layer_dims[0]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def effective_weights(self) -> list[np.ndarray]:
        return [w * m for w, m in zip(self.weights, self.masks)]

    def weight_count(self) -> int:
        return sum(w.size for w in self.weights)

    def bias_count(self) -> int:
        return sum(b.size for b in self.biases)

    def remaining_weights(self) -> int:
        return int(sum(m.sum() for m in self.masks))

    def pruned_fraction(self) -> float:
        """Fraction of weights (biases excluded) that are masked out."""
        return 1.0 - self.remaining_weights() / self.weight_count()

    def copy(self) -> "MaskedMlp":
        return copy.deepcopy(self)


def init_network(layer_dims, seed: int) -> MaskedMlp:
    """He-uniform weights (bound ``sqrt(6 / fan_in)``), zero biases, full masks."""
    dims = validate_layer_dims(layer_dims)
    rng = make_rng(seed, STREAM_INIT)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MaskedMlp(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        masks=[np.ones_like(w) for w in weights],
        init_weights=[w.copy() for w in weights],
        init_biases=[b.copy() for b in biases],
        metadata={"init_seed": int(seed)},
    )


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_trace(net: MaskedMlp, r: np.ndarray):
    """Activations of every layer, input first and sigmoid output last."""
    acts = [r]
    h = r
    last = net.num_layers - 1
    for i, (w, m, b) in enumerate(zip(net.weights, net.masks, net.biases)):
        z = h @ (w * m) + b
        h = sigmoid(z) if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def forward(net: MaskedMlp, r) -> np.ndarray:
    """Network output in (0, 1) for a vector ``(n,)`` or batch ``(B, n)``.

    ReLU on hidden layers, sigmoid on the output.  In float64 the sigmoid
    rounds to exactly 0 or 1 once a logit exceeds roughly 37 in magnitude.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != net.n:
        raise ContractError(f"input length {r.shape[-1]} != {net.n}")
    return _forward_trace(net, r)[-1]


def bce_loss(p, target) -> float:
    """Mean binary cross-entropy over all positions (and batch rows)."""
    p = np.clip(np.asarray(p, dtype=np.float64), LOSS_EPS, 1.0 - LOSS_EPS)
    t = np.asarray(target, dtype=np.float64)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p)))


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def norm(self) -> float:
        return math.sqrt(sum(float((g * g).sum()) for g in self.weights + self.biases))


def loss_and_gradients(net: MaskedMlp, r, target) -> tuple[float, Gradients]:
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    t = np.atleast_2d(np.asarray(target, dtype=np.float64))
    acts = _forward_trace(net, r)
    p = acts[-1]
    loss = bce_loss(p, t)
    # sigmoid + BCE: dL/dz = (p - t) / (#elements)
    delta = (p - t) / p.size
    gw = [None] * net.num_layers
    gb = [None] * net.num_layers
    for i in range(net.num_layers - 1, -1, -1):
        gw[i] = (acts[i].T @ delta) * net.masks[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ (net.weights[i] * net.masks[i]).T) * (acts[i] > 0)
    return loss, Gradients(gw, gb)


def backward(net: MaskedMlp, r, target) -> Gradients:
    """Exact gradients of ``bce_loss(forward(net, r), target)``; zero where masked."""
    return loss_and_gradients(net, r, target)[1]


class Adam:
    """Adam optimiser whose updates are multiplied by the weight masks."""

    def __init__(self, net: MaskedMlp, learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not learning_rate > 0:
            raise ContractError(f"learning rate must be positive, got {learning_rate}")
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        params = net.weights + net.biases
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, net: MaskedMlp, grads: Gradients) -> None:
        params = net.weights + net.biases
        masks = net.masks + [None] * len(net.biases)
        gs = grads.weights + grads.biases
        if len(gs) != len(params) or any(g.shape != p.shape for g, p in zip(gs, params)):
            raise ContractError("gradient shapes do not match the network")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, mask, g, m, v in zip(params, masks, gs, self.m, self.v):
            if mask is not None:
                g = g * mask
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if mask is not None:
                update *= mask
            p -= update


def optimizer_step(net: MaskedMlp, grads: Gradients, state: Adam) -> MaskedMlp:
    """Apply one Adam update in place and return the network."""
    state.step(net, grads)
    return net
