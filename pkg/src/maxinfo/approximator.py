"""Small numpy multilayer perceptrons with exact reverse-mode gradients.

Parameters live in one flat float64 vector. Layer ``l`` contributes its
weight matrix of shape ``(fan_in, fan_out)`` in row-major order followed by
its bias, so a batch ``x`` of shape ``(n, fan_in)`` maps to ``x @ W + b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("none", "tanh")


class ShapeError(ValueError):
    """Raised when an input does not match the network it is fed to."""


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple[int, ...]
    activation: str = "relu"
    output_activation: str = "none"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2:
            raise ValueError("an MLP needs at least an input and an output layer")
        if min(widths) < 1:
            raise ValueError(f"layer widths must be positive, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        w = self.layer_widths
        return list(zip(w[:-1], w[1:]))

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes)


def unpack(spec: MlpSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-layer ``(W, b)`` views into ``params`` (no copies)."""
    if params.shape != (spec.n_params,):
        raise ShapeError(f"expected {spec.n_params} parameters, got shape {params.shape}")
    layers = []
    pos = 0
    for fan_in, fan_out in spec.layer_shapes:
        W = params[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = params[pos:pos + fan_out]
        pos += fan_out
        layers.append((W, b))
    return layers


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    params = np.zeros(spec.n_params)
    for (fan_in, fan_out), (W, _) in zip(spec.layer_shapes, unpack(spec, params)):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W[...] = rng.uniform(-limit, limit, size=W.shape)
    return params


def _as_batch(spec: MlpSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(f"input of shape {x.shape} does not fit input width {spec.input_dim}")
    return x, single


def forward_cached(spec: MlpSpec, params: np.ndarray, x):
    """Forward pass that also returns the activations needed by :func:`vjp`."""
    h, single = _as_batch(spec, x)
    layers = unpack(spec, params)
    inputs, pre = [], []
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        inputs.append(h)
        z = h @ W + b
        if i < last:
            h = np.maximum(z, 0.0) if spec.activation == "relu" else np.tanh(z)
        else:
            h = np.tanh(z) if spec.output_activation == "tanh" else z
        pre.append(z if (i < last and spec.activation == "relu") else h)
    out = h[0] if single else h
    return out, (inputs, pre, single)


def forward(spec: MlpSpec, params: np.ndarray, x) -> np.ndarray:
    return forward_cached(spec, params, x)[0]


def vjp(spec: MlpSpec, params: np.ndarray, cache, cotangent, need_input: bool = False,
        need_params: bool = True):
    """Pull ``cotangent`` back through a cached forward pass.

    Returns ``(grad_params, grad_input)`` for the scalar
    ``sum(cotangent * output)``; batch rows are summed. Either part is None
    when not requested.
    """
    inputs, pre, single = cache
    g = np.asarray(cotangent, dtype=np.float64)
    if single:
        g = g[None, :]
    n = inputs[0].shape[0]
    if g.shape != (n, spec.output_dim):
        raise ShapeError(f"cotangent of shape {g.shape} does not fit output width {spec.output_dim}")

    layers = unpack(spec, params)
    grad = np.empty(spec.n_params) if need_params else None
    grad_layers = unpack(spec, grad) if need_params else None
    last = len(layers) - 1
    grad_input = None
    for i in range(last, -1, -1):
        W, _ = layers[i]
        if i == last:
            if spec.output_activation == "tanh":
                g = g * (1.0 - pre[i] ** 2)
        elif spec.activation == "relu":
            g = g * (pre[i] > 0.0)
        else:
            g = g * (1.0 - pre[i] ** 2)
        if need_params:
            dW, db = grad_layers[i]
            np.matmul(inputs[i].T, g, out=dW)
            np.sum(g, axis=0, out=db)
        if i > 0 or need_input:
            g = g @ W.T
        if i == 0 and need_input:
            grad_input = g[0] if single else g
    return grad, grad_input


def backward(spec: MlpSpec, params: np.ndarray, x, cotangent) -> np.ndarray:
    """Gradient of ``sum(cotangent * forward(x))`` with respect to ``params``."""
    _, cache = forward_cached(spec, params, x)
    return vjp(spec, params, cache, cotangent)[0]


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kwargs) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kwargs)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if params.shape != grad.shape or params.shape != state.first_moment.shape:
        raise ShapeError("parameter, gradient and moment lengths differ")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient entry")
    b1, b2 = state.beta1, state.beta2
    t = state.step_count + 1
    m = b1 * state.first_moment + (1.0 - b1) * grad
    v = b2 * state.second_moment + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, t, b1, b2, state.eps)


def polyak(target: np.ndarray, online: np.ndarray, tau: float) -> np.ndarray:
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if target.shape != online.shape:
        raise ShapeError("target and online parameter lengths differ")
    return tau * online + (1.0 - tau) * target


@dataclass
class Trainable:
    """A network's parameters bundled with their optimizer state."""

    spec: MlpSpec
    params: np.ndarray
    opt: AdamState = field(default=None)

    def __post_init__(self):
        if self.opt is None:
            self.opt = AdamState.zeros(self.spec.n_params)

    @classmethod
    def create(cls, spec: MlpSpec, rng: np.random.Generator) -> "Trainable":
        return cls(spec, init_params(spec, rng))

    def __call__(self, x) -> np.ndarray:
        return forward(self.spec, self.params, x)

    def forward_cached(self, x):
        return forward_cached(self.spec, self.params, x)

    def vjp(self, cache, cotangent, need_input: bool = False, need_params: bool = True):
        return vjp(self.spec, self.params, cache, cotangent, need_input, need_params)

    def step(self, grad: np.ndarray, lr: float) -> None:
        self.params, self.opt = adam_step(self.opt, self.params, grad, lr)
