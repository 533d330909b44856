"""Self-paced curriculum training loop.

Each batch is processed as follows:

1. forward every modality encoder and take per-sample unimodal losses;
2. fuse once with cold-start gates of 0.5 to obtain a provisional fused
   loss, then run the modality curriculum on it to get gates, adjusted
   weights and the fusion-effectiveness score;
3. fuse again with the real gates and score sample difficulty against the
   fused prediction (the volatility EMA is updated once per batch with the
   batch-mean standardized metrics);
4. solve the per-sample self-paced weight in closed form and take an SGD
   step on the task loss with per-sample gradient scale ``v * W``.

Curriculum weights (entropy weights, adjusted fusion weights, v, W) are
treated as constants during backpropagation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from . import modality_curriculum as mc
from . import sample_curriculum as sc
from .fusion import FusionStrategy, gated_weights
from .numerics import PROB_FLOOR, MlpEncoder, backward, cross_entropy, forward, init_encoder, sgd_step, softmax
from .synth_data import Dataset

log = logging.getLogger(__name__)


class NumericAbort(RuntimeError):
    def __init__(self, sample_id, metric):
        super().__init__(f"non-finite {metric} for sample {sample_id}")
        self.sample_id = sample_id
        self.metric = metric


@dataclass(frozen=True)
class EtaSchedule:
    eta0: float | None = None  # None: anchor to 0.5 * median(W * L) of the first batch
    growth: float = 0.1
    kind: str = "linear"

    def __post_init__(self):
        if self.kind not in ("linear", "exponential"):
            raise ValueError(f"unknown eta schedule {self.kind!r}")
        if self.growth <= 0:
            raise ValueError("eta growth must be positive")
        if self.eta0 is not None and self.eta0 <= 0:
            raise ValueError("eta0 must be positive")


def eta_at(schedule: EtaSchedule, t: int) -> float:
    if schedule.eta0 is None:
        raise ValueError("eta0 has not been resolved yet")
    if t < 0:
        raise ValueError("epoch index must be >= 0")
    if schedule.kind == "linear":
        return schedule.eta0 * (1.0 + schedule.growth * t)
    return schedule.eta0 * (1.0 + schedule.growth) ** t


def solve_v(w_factor, task_loss, eta):
    """Minimiser of ``v * W * L + eta * (1 - v)**2`` over ``v`` in [0, 1]."""
    if np.any(np.asarray(eta) <= 0):
        raise ValueError("eta must be positive")
    v = 1.0 - np.asarray(w_factor) * np.asarray(task_loss) / (2.0 * np.asarray(eta))
    return np.clip(v, 0.0, 1.0)


def modality_alignment(features_a, features_b) -> float:
    """Mean cosine of column-centred per-sample features, mapped to [0, 1]."""
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError("feature sets need the same number of samples")
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = na * nb
    cos = np.divide(np.sum(a * b, axis=1), denom, out=np.zeros_like(denom), where=denom > 0)
    return float((1.0 + cos.mean()) / 2.0)


@dataclass(frozen=True)
class CurriculumSettings:
    sdc_enabled: bool = True
    mdc_enabled: bool = True
    metrics_enabled: tuple[bool, bool, bool] = (True, True, True)  # loss, consistency, stability
    use_gmr: bool = True
    use_hmir: bool = True
    gating_enabled: bool = True
    gamma: float = 0.995
    orientation: sc.MetricOrientation = sc.MetricOrientation()
    task_loss: str = "composite"  # or "fused": plain cross-entropy of the fused prediction
    normalize_weights: bool = True  # rescale W to unit batch mean before the SGD step

    def __post_init__(self):
        if self.sdc_enabled and not any(self.metrics_enabled):
            raise ValueError("SDC needs at least one enabled metric")
        if self.mdc_enabled and not (self.use_gmr or self.use_hmir):
            raise ValueError("MDC needs at least one of GMR / HMIR")
        if self.task_loss not in ("composite", "fused"):
            raise ValueError(f"unknown task loss {self.task_loss!r}")

    @property
    def self_paced(self) -> bool:
        return self.sdc_enabled or self.mdc_enabled


@dataclass
class TrainState:
    encoders: list[MlpEncoder]
    volatility: sc.VolatilityState
    schedule: EtaSchedule
    head: MlpEncoder | None = None
    fusion_weights: np.ndarray | None = None  # per-modality weights used at inference for gated fusion


@dataclass
class TrainRecord:
    epoch: int
    mean_loss: float
    accuracy: float
    mean_v: float
    mean_d_task: float
    mean_d_fuse: float
    psi: np.ndarray
    gates: np.ndarray
    gains: np.ndarray
    omegas: np.ndarray
    modality_alignment: float
    mean_d_gmr: float = float("nan")
    mean_d_hmir: float = float("nan")
    per_sample: dict = field(default=None, repr=False)

    def row(self) -> list:
        vals = [self.epoch, self.mean_loss, self.accuracy, self.mean_v, self.mean_d_task, self.mean_d_fuse,
                *self.psi]
        for m in range(len(self.gates)):
            vals += [self.gates[m], self.gains[m], self.omegas[m]]
        vals.append(self.modality_alignment)
        return vals


def build_state(dims, n_classes, hidden, fusion: FusionStrategy, settings: CurriculumSettings,
                schedule: EtaSchedule, seed: int, activation="relu", head_hidden=()) -> TrainState:
    """Fresh encoders (one per modality) plus a concat head when the strategy needs one."""
    rng = np.random.default_rng(seed)
    encoders = [init_encoder([d, *h, n_classes], rng, activation) for d, h in zip(dims, hidden)]
    head = None
    if fusion.kind == "concat_head":
        width = sum(e.feature_dim for e in encoders)
        head = init_encoder([width, *head_hidden, n_classes], rng, activation)
    return TrainState(encoders, sc.VolatilityState(gamma=settings.gamma), schedule, head)


def _check_finite(name, values, ids):
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise NumericAbort(int(ids[np.argmax(bad)]), name)


@dataclass
class _BatchResult:
    logits: np.ndarray  # (M, B, K)
    probs: np.ndarray
    fused_logits: np.ndarray
    fused_probs: np.ndarray
    losses: np.ndarray  # (M, B)
    loss_concat: np.ndarray
    modality: mc.ModalityState
    weights: np.ndarray  # (M, B) effective fusion weight of each modality's logits (gated/uniform/sum)
    caches: list
    head_cache: object = None


def _fuse(state: TrainState, fusion: FusionStrategy, settings: CurriculumSettings, xs, y, ids):
    outs = [forward(e, x) for e, x in zip(state.encoders, xs)]
    logits = np.stack([o[0] for o in outs])
    caches = [o[1] for o in outs]
    probs = softmax(logits)
    m, b = logits.shape[:2]
    losses = np.stack([cross_entropy(p, y) for p in probs])
    _check_finite("unimodal loss", losses.sum(axis=0), ids)
    floored = np.maximum(losses, PROB_FLOOR)
    head_cache = None
    gated = fusion.kind == "gated_dyncim" and settings.gating_enabled

    if gated:
        omega = mc.omega_init(losses)
        active0, star0 = mc.activate_and_reweight(omega, np.full((m, b), 0.5), fusion.threshold, fusion.mu)
        w0 = gated_weights(star0, active0, fusion.renormalize)
        provisional = cross_entropy(softmax(np.sum(w0[..., None] * logits, axis=0)), y)
        loss_concat = provisional
    elif fusion.kind == "concat_head":
        fused_logits, head_cache = forward(state.head, np.concatenate([c.features for c in caches], axis=1))
        weights = np.zeros((m, b))
    else:
        weights = np.full((m, b), 1.0 if fusion.kind == "summation" else 1.0 / m)
        fused_logits = np.sum(weights[..., None] * logits, axis=0)
    if not gated:
        loss_concat = cross_entropy(softmax(fused_logits), y)
    _check_finite("fused loss", loss_concat, ids)

    ms = mc.assess_modalities(floored, np.maximum(loss_concat, PROB_FLOOR), threshold=fusion.threshold,
                              mu=fusion.mu, use_gmr=settings.use_gmr or not settings.mdc_enabled,
                              use_hmir=settings.use_hmir or not settings.mdc_enabled)
    if not settings.mdc_enabled:
        ones = np.ones((m, b))
        ms = replace(ms, gates=ones, active=np.ones((m, b), dtype=bool),
                     omega_star=ms.omega * 2.0 ** fusion.mu, d_fuse=np.ones(b))
    if gated:
        weights = gated_weights(ms.omega_star, ms.active, fusion.renormalize)
        fused_logits = np.sum(weights[..., None] * logits, axis=0)
    fused_probs = softmax(fused_logits)
    loss_concat = cross_entropy(fused_probs, y)
    _check_finite("fused loss", loss_concat, ids)
    ms.loss_concat = loss_concat
    return _BatchResult(logits, probs, fused_logits, fused_probs, losses, loss_concat, ms, weights, caches, head_cache)


def train_epoch(state: TrainState, fusion: FusionStrategy, batches, t: int, settings: CurriculumSettings,
                lr: float) -> tuple[TrainState, TrainRecord]:
    """One pass over ``batches``, an iterable of ``(xs, y, sample_ids)``."""
    encoders = list(state.encoders)
    head = state.head
    volatility = state.volatility
    schedule = state.schedule
    enabled = np.asarray(settings.metrics_enabled, dtype=bool)
    m = len(encoders)
    totals = dict(loss=0.0, correct=0, v=0.0, d_task=0.0, d_fuse=0.0, d_gmr=0.0, d_hmir=0.0)
    gate_sum, gain_sum, omega_sum, weight_sum = (np.zeros(m) for _ in range(4))
    n_seen = 0
    per_sample = {k: [] for k in ("sample_id", "d_task", "d_fuse", "v")}
    logits_seen = [[] for _ in range(m)]

    for xs, y, ids in batches:
        b = len(y)
        res = _fuse(TrainState(encoders, volatility, schedule, head), fusion, settings, xs, y, ids)
        preds = sc.PredictionSet(res.probs, res.fused_probs, y)
        d_loss, d_c, d_s, delta, _ = sc.raw_metrics(res.losses, res.loss_concat, preds)
        if settings.sdc_enabled:
            std = sc.standardize(np.stack([d_loss, d_c, d_s], axis=-1), settings.orientation)
            _check_finite("standardized difficulty", std.sum(axis=1), ids)
            volatility = sc.update_volatility(volatility, std.mean(axis=0))
            d_task = sc.composite_difficulty(std, sc.metric_weights(volatility, enabled))
        else:
            d_task = np.ones(b)
        d_fuse = res.modality.d_fuse
        task_loss = d_loss if settings.task_loss == "composite" else res.loss_concat
        w_factor = d_task * d_fuse
        if schedule.eta0 is None:
            schedule = replace(schedule, eta0=max(0.5 * float(np.median(w_factor * task_loss)), 1e-8))
            log.debug("eta0 anchored at %.6g", schedule.eta0)
        v = solve_v(w_factor, task_loss, eta_at(schedule, t)) if settings.self_paced else np.ones(b)
        reweight = w_factor / w_factor.mean() if settings.normalize_weights else w_factor
        scale = v * reweight / b

        onehot = np.eye(res.fused_probs.shape[1])[y]
        g_fused = (res.fused_probs - onehot) * scale[:, None]
        if settings.task_loss == "composite":
            g_logits = delta[..., None] * (res.probs - onehot[None]) * scale[None, :, None]
        else:
            g_logits = np.zeros_like(res.logits)
        if fusion.kind == "concat_head":
            hg = backward(head, res.head_cache, g_fused)
            splits = np.cumsum([e.feature_dim for e in encoders])[:-1]
            feat_grads = np.split(hg.inputs, splits, axis=1)
            head = sgd_step(head, hg, lr)
        else:
            g_logits = g_logits + res.weights[..., None] * g_fused[None]
            feat_grads = [None] * m
        encoders = [sgd_step(e, backward(e, c, g, grad_features=fg), lr)
                    for e, c, g, fg in zip(encoders, res.caches, g_logits, feat_grads)]

        n_seen += b
        totals["loss"] += float(task_loss.sum())
        totals["correct"] += int(np.sum(np.argmax(res.fused_probs, axis=1) == y))
        totals["v"] += float(v.sum())
        totals["d_task"] += float(d_task.sum())
        totals["d_fuse"] += float(d_fuse.sum())
        totals["d_gmr"] += float(res.modality.d_gmr.sum())
        totals["d_hmir"] += float(res.modality.d_hmir.sum())
        gate_sum += res.modality.gates.sum(axis=1)
        gain_sum += res.modality.gains.sum(axis=1)
        omega_sum += res.modality.omega.sum(axis=1)
        weight_sum += res.weights.sum(axis=1)
        per_sample["sample_id"].append(np.asarray(ids))
        per_sample["d_task"].append(d_task)
        per_sample["d_fuse"].append(d_fuse)
        per_sample["v"].append(v)
        for j in range(m):
            logits_seen[j].append(res.logits[j])

    if n_seen == 0:
        raise ValueError("empty batch stream")
    logits_all = [np.concatenate(chunks) for chunks in logits_seen]
    pairs = list(combinations(range(m), 2))
    alignment = float(np.mean([modality_alignment(logits_all[i], logits_all[j]) for i, j in pairs])) if pairs else 1.0
    record = TrainRecord(
        epoch=t,
        mean_loss=totals["loss"] / n_seen,
        accuracy=totals["correct"] / n_seen,
        mean_v=totals["v"] / n_seen,
        mean_d_task=totals["d_task"] / n_seen,
        mean_d_fuse=totals["d_fuse"] / n_seen,
        psi=sc.metric_weights(volatility, enabled) if settings.sdc_enabled else np.zeros(3),
        gates=gate_sum / n_seen,
        gains=gain_sum / n_seen,
        omegas=omega_sum / n_seen,
        modality_alignment=alignment,
        mean_d_gmr=totals["d_gmr"] / n_seen,
        mean_d_hmir=totals["d_hmir"] / n_seen,
        per_sample={k: np.concatenate(v) for k, v in per_sample.items()},
    )
    new_state = TrainState(encoders, volatility, schedule, head, weight_sum / n_seen)
    return new_state, record


def iterate_batches(ds: Dataset, batch_size: int, rng):
    """Shuffled ``(xs, y, sample_ids)`` minibatches covering ``ds`` once."""
    order = rng.permutation(len(ds))
    for start in range(0, len(ds), batch_size):
        idx = order[start : start + batch_size]
        yield [f[idx] for f in ds.features], ds.labels[idx], ds.sample_ids[idx]


def predict_logits(state: TrainState, fusion: FusionStrategy, settings: CurriculumSettings, xs) -> np.ndarray:
    """Fused logits at inference time, where labels (and so losses) are unknown.

    Gated fusion uses the per-modality mean effective weights from the last
    training epoch.
    """
    outs = [forward(e, x) for e, x in zip(state.encoders, xs)]
    logits = np.stack([o[0] for o in outs])
    m = logits.shape[0]
    if fusion.kind == "concat_head":
        return forward(state.head, np.concatenate([o[1].features for o in outs], axis=1))[0]
    if fusion.kind == "summation":
        w = np.ones(m)
    elif fusion.kind == "gated_dyncim" and settings.gating_enabled and state.fusion_weights is not None:
        w = state.fusion_weights
    else:
        w = np.full(m, 1.0 / m)
    return np.tensordot(w, logits, axes=1)


def accuracy(state: TrainState, fusion: FusionStrategy, settings: CurriculumSettings, ds: Dataset) -> float:
    logits = predict_logits(state, fusion, settings, ds.features)
    return float(np.mean(np.argmax(logits, axis=1) == ds.labels))
