"""Dense feedforward encoders with hand-written backpropagation.

Everything works on float64 numpy arrays. Inputs may be a single vector
``(d,)`` or a batch ``(B, d)``; weights are stored ``(d_in, d_out)`` so a
layer is ``x @ W + b``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

PROB_FLOOR = 1e-12
# bounds of the open unit interval, for outputs that must stay strictly inside it
OPEN_LO = np.nextafter(0.0, 1.0)
OPEN_HI = np.nextafter(1.0, 0.0)

_serials = itertools.count()


class ShapeError(ValueError):
    """Raised when array shapes do not line up with an encoder's layers."""


class StaleCacheError(ValueError):
    """Raised when a forward cache is fed back to a different encoder."""


@dataclass
class MlpEncoder:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"
    serial: int = field(default_factory=lambda: next(_serials), compare=False)

    def __post_init__(self):
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.layer_dims) < 2:
            raise ShapeError("an encoder needs at least an input and an output width")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("one weight matrix and one bias per layer required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expected:
                raise ShapeError(f"layer {i}: weight shape {w.shape}, expected {expected}")
            if b.shape != (self.layer_dims[i + 1],):
                raise ShapeError(f"layer {i}: bias shape {b.shape}, expected {(expected[1],)}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def feature_dim(self) -> int:
        """Width of the representation fed to the last layer."""
        return self.layer_dims[-2]

    def copy(self) -> MlpEncoder:
        return MlpEncoder(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )


@dataclass
class ForwardCache:
    serial: int
    inputs: list[np.ndarray]  # input to each layer, inputs[0] is x
    preacts: list[np.ndarray]  # pre-activation of each hidden layer
    squeezed: bool

    @property
    def features(self) -> np.ndarray:
        """Penultimate representation (input of the output layer)."""
        f = self.inputs[-1]
        return f[0] if self.squeezed else f


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray  # gradient w.r.t. the encoder input


def init_encoder(layer_dims, rng, activation="relu") -> MlpEncoder:
    """Glorot-uniform weights, zero biases."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    dims = [int(d) for d in layer_dims]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpEncoder(dims, weights, biases, activation)


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _act_grad(z, a, kind):
    return (z > 0).astype(np.float64) if kind == "relu" else 1.0 - a * a


def forward(encoder: MlpEncoder, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    h = x[None, :] if squeezed else x
    if h.ndim != 2:
        raise ShapeError(f"expected a vector or a 2-d batch, got ndim={x.ndim}")
    inputs, preacts = [], []
    n_layers = len(encoder.weights)
    for i, (w, b) in enumerate(zip(encoder.weights, encoder.biases)):
        if h.shape[1] != w.shape[0]:
            raise ShapeError(f"layer {i}: input width {h.shape[1]} does not match {w.shape[0]}")
        inputs.append(h)
        z = h @ w + b
        if i < n_layers - 1:
            preacts.append(z)
            h = _act(z, encoder.activation)
        else:
            h = z
    logits = h[0] if squeezed else h
    return logits, ForwardCache(encoder.serial, inputs, preacts, squeezed)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x) -> np.ndarray:
    """Logistic function kept strictly inside (0, 1); plain float64 rounds it to 1 past x ~ 37."""
    x = np.asarray(x, dtype=np.float64)
    return np.clip(np.exp(-np.logaddexp(0.0, -x)), OPEN_LO, OPEN_HI)


def safe_log(p) -> np.ndarray:
    return np.log(np.clip(p, PROB_FLOOR, 1.0))


def cross_entropy(p, y):
    """Per-sample ``-log p_y`` with the probability floor.

    ``p`` is ``(K,)`` with an integer ``y`` or ``(B, K)`` with ``y`` of shape
    ``(B,)``.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    k = p.shape[-1]
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError(f"class index out of range for K={k}")
    if p.ndim == 1:
        return float(-safe_log(p[int(y)]))
    return -safe_log(np.take_along_axis(p, y.reshape(-1, 1), axis=-1)[:, 0])


def backward(encoder: MlpEncoder, cache: ForwardCache, grad_logits, grad_features=None) -> Gradients:
    """Exact gradients given dLoss/dlogits.

    ``grad_features`` optionally adds a gradient arriving at the penultimate
    representation (used when a fusion head consumes the features).
    """
    if cache.serial != encoder.serial:
        raise StaleCacheError("cache was produced by a different encoder or parameter version")
    g = np.asarray(grad_logits, dtype=np.float64)
    if cache.squeezed:
        g = g[None, :]
    if g.shape != (cache.inputs[0].shape[0], encoder.output_dim):
        raise ShapeError(f"grad_logits shape {g.shape} does not match the cached forward pass")
    n_layers = len(encoder.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        h = cache.inputs[i]
        gw[i] = h.T @ g
        gb[i] = g.sum(axis=0)
        g = g @ encoder.weights[i].T
        if i == n_layers - 1 and grad_features is not None:
            extra = np.asarray(grad_features, dtype=np.float64)
            g = g + (extra[None, :] if cache.squeezed else extra)
        if i > 0:
            z = cache.preacts[i - 1]
            g = g * _act_grad(z, h, encoder.activation)
    return Gradients(gw, gb, g[0] if cache.squeezed else g)


def sgd_step(encoder: MlpEncoder, grads: Gradients, lr: float, scale: float = 1.0) -> MlpEncoder:
    """Return a new encoder with ``w - lr * scale * g`` applied to every parameter."""
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    if len(grads.weights) != len(encoder.weights):
        raise ShapeError("gradient layer count does not match encoder")
    step = lr * scale
    new_w, new_b = [], []
    for i, (w, b, dw, db) in enumerate(zip(encoder.weights, encoder.biases, grads.weights, grads.biases)):
        if dw.shape != w.shape or db.shape != b.shape:
            raise ShapeError(f"layer {i}: gradient shape mismatch")
        new_w.append(w - step * dw)
        new_b.append(b - step * db)
    return MlpEncoder(list(encoder.layer_dims), new_w, new_b, encoder.activation)
