"""Central finite-difference oracle for encoder gradients.

The oracle evaluates the loss with its own forward pass in extended
precision. In float64 the difference quotient at h = 1e-5 carries ~1e-10 of
rounding noise, which alone exceeds a 1e-5 relative tolerance on gradient
entries near 1e-6.
"""

import numpy as np

from dyncim.numerics import backward, forward, init_encoder, softmax

H = np.longdouble(1e-5)
FLOOR = 1e-6  # entries smaller than this are compared absolutely


def _oracle_loss(weights, biases, activation, x, y):
    h = x.astype(np.longdouble)
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        h = z if i == last else (np.maximum(z, 0) if activation == "relu" else np.tanh(z))
    top = h.max(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(np.exp(h - top).sum(axis=1))
    return np.sum(lse - h[np.arange(len(y)), y])


def max_relative_error(encoder, rng, batch=3):
    """Worst relative error of ``backward`` against central differences on a CE loss."""
    k = encoder.output_dim
    x = rng.normal(size=(batch, encoder.input_dim))
    y = rng.integers(0, k, size=batch)
    logits, cache = forward(encoder, x)
    grads = backward(encoder, cache, softmax(logits) - np.eye(k)[y])
    ws = [w.astype(np.longdouble) for w in encoder.weights]
    bs = [b.astype(np.longdouble) for b in encoder.biases]
    worst = 0.0
    for params, analytic in ((ws, grads.weights), (bs, grads.biases)):
        for p, g in zip(params, analytic):
            for idx in np.ndindex(p.shape):
                keep = p[idx]
                p[idx] = keep + H
                up = _oracle_loss(ws, bs, encoder.activation, x, y)
                p[idx] = keep - H
                down = _oracle_loss(ws, bs, encoder.activation, x, y)
                p[idx] = keep
                numeric = float((up - down) / (2 * H))
                worst = max(worst, abs(numeric - g[idx]) / max(abs(numeric), abs(g[idx]), FLOOR))
    return worst


def random_encoder(rng, activation=None):
    """Up to three layers and 32 units, random activation and small random biases."""
    n_layers = int(rng.integers(1, 4))
    dims = ([int(rng.integers(1, 9))] + [int(rng.integers(2, 33)) for _ in range(n_layers - 1)]
            + [int(rng.integers(2, 6))])
    enc = init_encoder(dims, rng, activation or ("relu", "tanh")[int(rng.integers(0, 2))])
    enc.biases = [rng.normal(scale=0.1, size=b.shape) for b in enc.biases]
    return enc
