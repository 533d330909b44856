"""Seeded synthetic multimodal classification data.

Each modality draws features around class prototypes. With the
per-sample noise-to-signal ratio ``r = sigma_i / snr``,
``x = (prototype[y] + r * noise) / (1 + r)`` on a random Gaussian prototype
restricted to the first ``informative_fraction`` of the feature dimensions.
``sigma_i`` is a per-sample noise multiplier drawn log-uniformly from
``[exp(-spread), exp(spread)]`` and shared across modalities, so some
samples are hard in every modality at once.

The ``1 / (1 + r)`` rescale keeps every sample at a comparable norm. Without
it a noisy sample is also a large one, and a linear model's logits grow with
the noise, which makes its loss a poor proxy for how hard the sample is.
The rescale does not change the class overlap, so ``true_difficulty`` is
the same either way. ``snr = inf`` gives the prototype exactly and
``snr = 0`` gives pure unit noise.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

MAGIC = b"DYNCIMDS"
TEXT_TAG = "# dyncim-dataset v1"


@dataclass(frozen=True)
class ModalitySpec:
    feature_dim: int
    snr: float = 1.0
    informative_fraction: float = 1.0

    @property
    def n_informative(self) -> int:
        if self.informative_fraction <= 0:
            return 0
        return max(1, int(round(self.informative_fraction * self.feature_dim)))


@dataclass(frozen=True)
class DatasetSpec:
    n_samples: int
    n_classes: int
    modalities: tuple[ModalitySpec, ...]
    sample_noise_spread: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "modalities", tuple(
            m if isinstance(m, ModalitySpec) else ModalitySpec(**m) for m in self.modalities
        ))
        problems = []
        if self.n_samples < 1:
            problems.append("n_samples must be >= 1")
        if self.n_classes < 2:
            problems.append("n_classes must be >= 2")
        if not self.modalities:
            problems.append("at least one modality required")
        for i, m in enumerate(self.modalities):
            if m.feature_dim < 1:
                problems.append(f"modalities[{i}].feature_dim must be >= 1")
            if not 0.0 <= m.informative_fraction <= 1.0:
                problems.append(f"modalities[{i}].informative_fraction must lie in [0, 1]")
            if not m.snr >= 0:
                problems.append(f"modalities[{i}].snr must be >= 0")
        if not self.sample_noise_spread >= 0:
            problems.append("sample_noise_spread must be >= 0")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class SyntheticSample:
    features: list[np.ndarray]
    label: int
    true_difficulty: float


@dataclass
class Dataset:
    features: list[np.ndarray]  # one (n, d_m) array per modality
    labels: np.ndarray
    true_difficulty: np.ndarray
    n_classes: int
    sample_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.sample_ids is None:
            self.sample_ids = np.arange(len(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_modalities(self) -> int:
        return len(self.features)

    @property
    def dims(self) -> list[int]:
        return [f.shape[1] for f in self.features]

    def __getitem__(self, i) -> SyntheticSample:
        return SyntheticSample([f[i] for f in self.features], int(self.labels[i]), float(self.true_difficulty[i]))

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset([f[idx] for f in self.features], self.labels[idx], self.true_difficulty[idx],
                       self.n_classes, self.sample_ids[idx])


def dominance_profile(spec: DatasetSpec) -> list[float]:
    """Expected prototype distance over per-coordinate noise scale, per modality."""
    return [m.snr * math.sqrt(2.0 * m.n_informative) for m in spec.modalities]


def generate(spec: DatasetSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_samples, spec.n_classes
    labels = rng.permutation(np.arange(n) % k)
    if spec.sample_noise_spread > 0:
        sigma = np.exp(rng.uniform(-spec.sample_noise_spread, spec.sample_noise_spread, size=n))
    else:
        sigma = np.ones(n)
    features = []
    for m in spec.modalities:
        protos = np.zeros((k, m.feature_dim))
        protos[:, : m.n_informative] = rng.standard_normal((k, m.n_informative))
        noise = rng.standard_normal((n, m.feature_dim))
        if math.isinf(m.snr):
            x = protos[labels].copy()
        elif m.snr == 0:
            x = noise
        else:
            r = (sigma / m.snr)[:, None]
            x = (protos[labels] + r * noise) / (1.0 + r)
        features.append(x)
    separation = math.sqrt(sum(p * p for p in dominance_profile(spec)))
    with np.errstate(divide="ignore", invalid="ignore"):
        difficulty = erfc(separation / sigma / (2.0 * math.sqrt(2.0))) if math.isfinite(separation) else np.zeros(n)
    return Dataset(features, labels.astype(np.int64), np.asarray(difficulty, dtype=np.float64), k)


def train_test_split(ds: Dataset, seed: int, test_fraction: float = 0.2) -> tuple[Dataset, Dataset]:
    order = np.random.default_rng(seed).permutation(len(ds))
    n_test = int(round(test_fraction * len(ds)))
    return ds.subset(np.sort(order[n_test:])), ds.subset(np.sort(order[:n_test]))


def _record_dtype(dims):
    fields = [("label", "<i8"), ("true_difficulty", "<f8")]
    fields += [(f"x{m}", "<f8", (d,)) for m, d in enumerate(dims)]
    return np.dtype(fields)


def save_dataset(ds: Dataset, path, fmt: str = "binary") -> None:
    """Write ``ds`` as little-endian binary records or comma-delimited text.

    Binary layout: 8-byte magic, then int64 ``n, K, M, d_0..d_{M-1}``, then
    one packed record per sample (int64 label, float64 true_difficulty,
    float64 features for each modality in order).
    """
    path = Path(path)
    n, dims = len(ds), ds.dims
    if fmt == "binary":
        rec = np.empty(n, dtype=_record_dtype(dims))
        rec["label"] = ds.labels
        rec["true_difficulty"] = ds.true_difficulty
        for m, f in enumerate(ds.features):
            rec[f"x{m}"] = f
        header = MAGIC + struct.pack(f"<{3 + len(dims)}q", n, ds.n_classes, len(dims), *dims)
        path.write_bytes(header + rec.tobytes())
    elif fmt == "text":
        lines = [TEXT_TAG, " ".join(str(v) for v in (n, ds.n_classes, len(dims), *dims))]
        for i in range(n):
            vals = [str(int(ds.labels[i])), repr(float(ds.true_difficulty[i]))]
            for f in ds.features:
                vals.extend(repr(float(v)) for v in f[i])
            lines.append(",".join(vals))
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")


def load_dataset(path) -> Dataset:
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(MAGIC):
        off = len(MAGIC)
        n, k, m = struct.unpack_from("<3q", raw, off)
        dims = list(struct.unpack_from(f"<{m}q", raw, off + 24))
        off += 24 + 8 * m
        rec = np.frombuffer(raw, dtype=_record_dtype(dims), count=n, offset=off)
        feats = [np.array(rec[f"x{j}"], dtype=np.float64).reshape(n, d) for j, d in enumerate(dims)]
        return Dataset(feats, np.array(rec["label"], dtype=np.int64),
                       np.array(rec["true_difficulty"], dtype=np.float64), int(k))
    lines = raw.decode().splitlines()
    if not lines or lines[0] != TEXT_TAG:
        raise ValueError(f"{path} is not a dyncim dataset file")
    head = [int(v) for v in lines[1].split()]
    n, k, m, dims = head[0], head[1], head[2], head[3:]
    labels = np.empty(n, dtype=np.int64)
    diff = np.empty(n)
    feats = [np.empty((n, d)) for d in dims]
    for i, line in enumerate(lines[2 : 2 + n]):
        parts = line.split(",")
        labels[i] = int(parts[0])
        diff[i] = float(parts[1])
        pos = 2
        for j, d in enumerate(dims):
            feats[j][i] = [float(v) for v in parts[pos : pos + d]]
            pos += d
    return Dataset(feats, labels, diff, k)
