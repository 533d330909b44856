"""Fusion strategies: gated weighting plus the concat/summation/uniform baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import MlpEncoder, ShapeError, forward

KINDS = ("gated_dyncim", "concat_head", "summation", "uniform_weighted")


@dataclass(frozen=True)
class FusionStrategy:
    kind: str = "gated_dyncim"
    threshold: float = 0.5
    mu: float = 1.0
    renormalize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fusion kind {self.kind!r}; choose from {KINDS}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("gate threshold must lie in (0, 1)")


def _stack(logits_per_modality):
    try:
        z = np.stack([np.asarray(l, dtype=np.float64) for l in logits_per_modality])
    except ValueError as exc:
        raise ShapeError("modality logits must share a shape") from exc
    if z.shape[0] == 0:
        raise ValueError("need at least one modality")
    return z


def fuse_gated(logits_per_modality, omega_star, active, renormalize=False):
    """Sum of active modality logits scaled by their adjusted weights."""
    z = _stack(logits_per_modality)
    w = np.asarray(omega_star, dtype=np.float64)
    active = np.asarray(active, dtype=bool)
    if not np.all(active.any(axis=0)):
        raise ValueError("gated fusion needs at least one active modality")
    return np.sum(gated_weights(w, active, renormalize)[..., None] * z, axis=0)


def gated_weights(omega_star, active, renormalize=False):
    w = np.where(np.asarray(active, dtype=bool), np.asarray(omega_star, dtype=np.float64), 0.0)
    return w / w.sum(axis=0, keepdims=True) if renormalize else w


def fuse_concat(features_per_modality, head: MlpEncoder):
    x = np.concatenate([np.asarray(f, dtype=np.float64) for f in features_per_modality], axis=-1)
    if x.shape[-1] != head.input_dim:
        raise ShapeError(f"concatenated width {x.shape[-1]} does not match head input {head.input_dim}")
    return forward(head, x)[0]


def fuse_summation(logits_per_modality):
    return _stack(logits_per_modality).sum(axis=0)


def fuse_uniform(logits_per_modality):
    return _stack(logits_per_modality).mean(axis=0)
