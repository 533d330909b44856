"""Modality-level contribution measures and the gates derived from them.

All functions take per-modality quantities on axis 0 and broadcast over any
trailing batch shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import sigmoid

EPSILON = 1e-6
LAMBDA0 = 0.5


def _positive(name, values):
    values = np.asarray(values, dtype=np.float64)
    if np.any(~(values > 0)):
        raise ValueError(f"{name} must be strictly positive")
    return values


def gmr(losses, loss_concat):
    """Geometric mean of the fused-to-unimodal loss ratios, evaluated in log space."""
    losses = _positive("losses", losses)
    loss_concat = _positive("loss_concat", loss_concat)
    return np.exp(np.mean(np.log(loss_concat)[None] - np.log(losses), axis=0))


def gains(losses, loss_concat):
    losses = _positive("losses", losses)
    loss_concat = np.asarray(loss_concat, dtype=np.float64)
    return np.exp((losses - loss_concat[None]) / losses)


def omega_init(losses):
    neg = -np.asarray(losses, dtype=np.float64)
    e = np.exp(neg - neg.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def hmir(gain, omega, epsilon=EPSILON):
    gain = np.asarray(gain, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    m = gain.shape[0]
    return m / np.sum(omega * (1.0 + 1.0 / (gain + epsilon)), axis=0)


def balance_factors(gain, lambda0=LAMBDA0):
    gain = np.asarray(gain, dtype=np.float64)
    return lambda0 + 0.5 * sigmoid(np.abs(gain - gain.mean(axis=0, keepdims=True)))


def gates(d_gmr, d_hmir, lambdas):
    lambdas = np.asarray(lambdas, dtype=np.float64)
    return sigmoid(lambdas * np.asarray(d_gmr)[None] + (1.0 - lambdas) * np.asarray(d_hmir)[None])


def activate_and_reweight(omega, gate, threshold=0.5, mu=1.0):
    """Active mask and boosted weights ``omega * (1 + g)**mu`` (zero when inactive).

    When no gate reaches the threshold the single best-gated modality is kept.
    """
    omega = np.asarray(omega, dtype=np.float64)
    gate = np.asarray(gate, dtype=np.float64)
    active = gate >= threshold
    empty = ~active.any(axis=0)
    if np.any(empty):
        top = np.argmax(gate, axis=0)
        fallback = np.arange(gate.shape[0]).reshape((-1,) + (1,) * (gate.ndim - 1)) == top[None]
        active = active | (fallback & empty[None])
    omega_star = np.where(active, omega * (1.0 + gate) ** mu, 0.0)
    return active, omega_star


def fuse_effectiveness(gate):
    gate = np.asarray(gate, dtype=np.float64)
    if gate.ndim == 0 or gate.shape[0] == 0:
        raise ValueError("need at least one gate")
    return gate.mean(axis=0)


@dataclass
class ModalityState:
    losses: np.ndarray
    loss_concat: np.ndarray
    gains: np.ndarray
    omega: np.ndarray
    omega_star: np.ndarray
    lambdas: np.ndarray
    gates: np.ndarray
    active: np.ndarray  # boolean mask, same shape as gates
    d_gmr: np.ndarray
    d_hmir: np.ndarray
    d_fuse: np.ndarray
    epsilon: float = EPSILON
    lambda0: float = LAMBDA0


def assess_modalities(losses, loss_concat, *, threshold=0.5, mu=1.0, use_gmr=True, use_hmir=True,
                      epsilon=EPSILON, lambda0=LAMBDA0) -> ModalityState:
    """Run the whole modality curriculum for per-sample losses.

    With one of the two measures switched off the gate reads only the other
    (balance factor pinned to 1 for GMR alone, 0 for HMIR alone).
    """
    if not (use_gmr or use_hmir):
        raise ValueError("at least one of GMR / HMIR must be enabled")
    losses = np.asarray(losses, dtype=np.float64)
    loss_concat = np.asarray(loss_concat, dtype=np.float64)
    d_g = gmr(losses, loss_concat)
    gain = gains(losses, loss_concat)
    omega = omega_init(losses)
    d_h = hmir(gain, omega, epsilon)
    lam = balance_factors(gain, lambda0)
    if not use_hmir:
        lam_gate = np.ones_like(lam)
    elif not use_gmr:
        lam_gate = np.zeros_like(lam)
    else:
        lam_gate = lam
    g = gates(d_g, d_h, lam_gate)
    active, omega_star = activate_and_reweight(omega, g, threshold, mu)
    return ModalityState(
        losses=losses, loss_concat=loss_concat, gains=gain, omega=omega, omega_star=omega_star,
        lambdas=lam, gates=g, active=active, d_gmr=d_g, d_hmir=d_h, d_fuse=fuse_effectiveness(g),
        epsilon=epsilon, lambda0=lambda0,
    )
