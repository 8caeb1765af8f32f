"""Minimal dense-network substrate: forward pass, reverse-mode gradients,
Adam, and bit-exact checkpointing.

Just enough machinery to train the actor, critic and neighbor encoder.
Everything is float64 numpy; networks are lists of affine layers with relu,
tanh or identity activations. Gradients are computed by hand (no autograd)
and verified against finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")

CHECKPOINT_FORMAT = "rpfnav-checkpoint-v1"


@dataclass
class Layer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray     # (fan_out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ValueError("layer weight/bias shapes are inconsistent")


@dataclass
class DenseNet:
    layers: list[Layer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    def parameters(self) -> list[np.ndarray]:
        params = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.bias)
        return params


@dataclass
class GradientTape:
    """Per-parameter gradient buffers mirroring a DenseNet's shapes."""

    grads: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: DenseNet) -> "GradientTape":
        return cls([np.zeros_like(p) for p in net.parameters()])

    def add_(self, other: "GradientTape") -> "GradientTape":
        for mine, theirs in zip(self.grads, other.grads):
            mine += theirs
        return self

    def scale_(self, factor: float) -> "GradientTape":
        for g in self.grads:
            g *= factor
        return self


def init_dense(sizes: list[int], activations: list[str], rng: np.random.Generator) -> DenseNet:
    """Glorot-uniform weights, zero biases."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(Layer(weights=weights, bias=np.zeros(fan_out), activation=act))
    return DenseNet(layers)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activate_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Affine + activation composition; accepts (d,) or (batch, d) input."""
    a = np.asarray(x, dtype=np.float64)
    squeeze = a.ndim == 1
    if squeeze:
        a = a[None, :]
    if a.shape[1] != net.in_dim:
        raise ValueError(f"input width {a.shape[1]} != first layer {net.in_dim}")
    for layer in net.layers:
        a = _activate(a @ layer.weights + layer.bias, layer.activation)
    return a[0] if squeeze else a


def forward_cached(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Forward pass that keeps the per-layer inputs and pre-activations."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != net.in_dim:
        raise ValueError(f"input width {a.shape[1]} != first layer {net.in_dim}")
    cache = []
    for layer in net.layers:
        z = a @ layer.weights + layer.bias
        out = _activate(z, layer.activation)
        cache.append((a, z, out))
        a = out
    return a, cache


def forward_cached_stable(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Like ``forward_cached`` but with a batch-shape-independent reduction.

    BLAS matmuls may round differently depending on the batch size; einsum
    contracts in a fixed order, so each row's output is bit-identical no
    matter what it is batched with. Used where per-row bitwise
    reproducibility matters (the neighbor encoder); slower for big layers.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != net.in_dim:
        raise ValueError(f"input width {a.shape[1]} != first layer {net.in_dim}")
    cache = []
    for layer in net.layers:
        z = np.einsum("ij,jk->ik", a, layer.weights, optimize=False) + layer.bias
        out = _activate(z, layer.activation)
        cache.append((a, z, out))
        a = out
    return a, cache


def backward(net: DenseNet, cache: list, grad_out: np.ndarray) -> tuple[GradientTape, np.ndarray]:
    """Exact reverse-mode gradients from a cached forward pass.

    ``grad_out`` is dLoss/dOutput with the same (batch, out) shape as the
    cached output. Returns the parameter tape and dLoss/dInput.
    """
    grad = np.asarray(grad_out, dtype=np.float64)
    if grad.ndim == 1:
        grad = grad[None, :]
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        a_in, z, a_out = cache[idx]
        dz = grad * _activate_grad(z, a_out, layer.activation)
        grads[2 * idx] = a_in.T @ dz
        grads[2 * idx + 1] = dz.sum(axis=0)
        grad = dz @ layer.weights.T
    return GradientTape(grads), grad


@dataclass
class AdamState:
    """First/second moment buffers plus the shared step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, applied to the arrays in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and moment buffers must align")
    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Versioned binary dump; float64 arrays round-trip bit-exactly."""
    header = dict(meta)
    header["format"] = CHECKPOINT_FORMAT
    payload = {key: np.ascontiguousarray(value) for key, value in arrays.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8),
                 **payload)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unrecognized checkpoint format: {meta.get('format')!r}")
        arrays = {key: data[key] for key in data.files if key != "__meta__"}
    return arrays, meta
