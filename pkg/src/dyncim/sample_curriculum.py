"""Sample-level difficulty: deviation, consistency, stability and their
volatility-weighted composite.

Scoring functions are vectorised: a leading modality axis (where relevant)
followed by any batch shape, with the class axis last.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import OPEN_HI, OPEN_LO, safe_log, sigmoid

METRICS = ("loss", "consistency", "stability")
SIMPLEX_TOL = 1e-9


@dataclass
class PredictionSet:
    """Per-modality and fused class distributions for one sample or a batch.

    ``per_modality`` has shape ``(M, K)`` or ``(M, B, K)``; ``fused`` drops the
    leading axis; ``label`` is an int or a ``(B,)`` array.
    """

    per_modality: np.ndarray
    fused: np.ndarray
    label: int | np.ndarray

    def __post_init__(self):
        self.per_modality = np.asarray(self.per_modality, dtype=np.float64)
        self.fused = np.asarray(self.fused, dtype=np.float64)
        if self.per_modality.ndim < 2 or self.per_modality.shape[0] == 0:
            raise ValueError("need at least one modality")
        if self.per_modality.shape[1:] != self.fused.shape:
            raise ValueError(
                f"modality predictions {self.per_modality.shape[1:]} and fused {self.fused.shape} disagree"
            )
        for name, arr in (("per_modality", self.per_modality), ("fused", self.fused)):
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
                raise ValueError(f"{name} rows must be probability vectors")
        k = self.fused.shape[-1]
        lab = np.asarray(self.label)
        if np.any(lab < 0) or np.any(lab >= k):
            raise ValueError(f"label out of range for K={k}")

    @property
    def n_modalities(self) -> int:
        return self.per_modality.shape[0]


@dataclass(frozen=True)
class MetricOrientation:
    s_loss: int = 1
    s_consistency: int = 1
    s_stability: int = 1

    def __post_init__(self):
        for v in self.as_array():
            if v not in (1, -1):
                raise ValueError("orientation signs must be +1 or -1")

    def as_array(self) -> np.ndarray:
        return np.array([self.s_loss, self.s_consistency, self.s_stability], dtype=np.float64)


@dataclass
class VolatilityState:
    gamma: float = 0.995
    ema: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_standardized: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        self.ema = np.asarray(self.ema, dtype=np.float64)

    @property
    def psi(self) -> np.ndarray:
        return metric_weights(self)


@dataclass
class DifficultyRecord:
    d_loss: np.ndarray
    d_consistency: np.ndarray
    d_stability: np.ndarray
    standardized: np.ndarray  # (..., 3) in metric order loss, consistency, stability
    d_task: np.ndarray
    delta_weights: np.ndarray  # (M, ...)
    entropies: np.ndarray  # (M, ...)


def entropy(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return -np.sum(p * safe_log(p), axis=-1)


def deviation_loss(losses_per_modality, loss_concat, predictions: PredictionSet):
    """Concat loss plus unimodal losses weighted by a softmax over negative entropy.

    Returns ``(d_loss, delta, entropies)``.
    """
    losses = np.asarray(losses_per_modality, dtype=np.float64)
    if losses.ndim == 0 or losses.shape[0] == 0:
        raise ValueError("deviation_loss needs at least one modality")
    if losses.shape[0] != predictions.n_modalities:
        raise ValueError("one loss per modality required")
    u = entropy(predictions.per_modality)
    z = -u - np.max(-u, axis=0, keepdims=True)
    delta = np.exp(z) / np.exp(z).sum(axis=0, keepdims=True)
    d_loss = np.asarray(loss_concat, dtype=np.float64) + np.sum(delta * losses, axis=0)
    return d_loss, delta, u


def consistency(predictions: PredictionSet) -> np.ndarray:
    diff = predictions.per_modality - predictions.fused[None]
    return np.mean(np.sum(diff * diff, axis=-1), axis=0)


def stability(fused, y) -> np.ndarray:
    """``-log p_y + sum_{k != y} log p_k``; grows as the prediction gets worse."""
    p = np.asarray(fused, dtype=np.float64)
    y = np.asarray(y)
    k = p.shape[-1]
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError(f"class index out of range for K={k}")
    logp = safe_log(p)
    onehot = np.arange(k) == y[..., None]
    return np.sum(np.where(onehot, -logp, logp), axis=-1)


def standardize(raw, orientation: MetricOrientation | None = None) -> np.ndarray:
    orientation = orientation or MetricOrientation()
    raw = np.asarray(raw, dtype=np.float64)
    return sigmoid(orientation.as_array() * raw)


def update_volatility(state: VolatilityState, standardized) -> VolatilityState:
    """One EMA step on the absolute change of the (batch-mean) standardized metrics.

    The first call only records the reference value.
    """
    current = np.asarray(standardized, dtype=np.float64).copy()
    if state.prev_standardized is None:
        return replace(state, ema=state.ema.copy(), prev_standardized=current)
    innovation = np.abs(current - state.prev_standardized)
    ema = state.gamma * state.ema + (1.0 - state.gamma) * innovation
    return replace(state, ema=ema, prev_standardized=current)


def metric_weights(state: VolatilityState, enabled=None) -> np.ndarray:
    """Normalised volatility; uniform over the enabled metrics when all EMAs are zero."""
    mask = np.ones(3, dtype=bool) if enabled is None else np.asarray(enabled, dtype=bool)
    if not mask.any():
        raise ValueError("at least one metric must be enabled")
    e = np.where(mask, state.ema, 0.0)
    total = e.sum()
    if total <= 0.0:
        return mask / mask.sum()
    return e / total


def composite_difficulty(standardized, psi) -> np.ndarray:
    # a convex mix of values just below 1 can round to exactly 1
    d = np.asarray(standardized, dtype=np.float64) @ np.asarray(psi, dtype=np.float64)
    return np.clip(d, OPEN_LO, OPEN_HI)


def raw_metrics(losses_per_modality, loss_concat, predictions: PredictionSet):
    """The three unstandardized metrics plus the entropy weighting byproducts."""
    d_loss, delta, u = deviation_loss(losses_per_modality, loss_concat, predictions)
    d_c = consistency(predictions)
    d_s = stability(predictions.fused, predictions.label)
    return d_loss, d_c, d_s, delta, u


def score_samples(losses_per_modality, loss_concat, predictions: PredictionSet, psi,
                  orientation: MetricOrientation | None = None) -> DifficultyRecord:
    d_loss, d_c, d_s, delta, u = raw_metrics(losses_per_modality, loss_concat, predictions)
    std = standardize(np.stack([d_loss, d_c, d_s], axis=-1), orientation)
    return DifficultyRecord(d_loss, d_c, d_s, std, composite_difficulty(std, psi), delta, u)
