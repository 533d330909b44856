"""Run configuration: YAML in, fully resolved nested dict out.

Unknown keys and bad values raise :class:`ConfigError` naming the dotted
field. The resolved dict (defaults filled in) is what gets echoed to
``summary.json``.
"""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .fusion import KINDS, FusionStrategy
from .sample_curriculum import MetricOrientation
from .synth_data import DatasetSpec, ModalitySpec
from .trainer import CurriculumSettings, EtaSchedule


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": 0,
    "epochs": 30,
    "batch_size": 32,
    "lr": 0.1,
    "dataset": {
        "n_samples": 2000,
        "n_classes": 4,
        "sample_noise_spread": 2.0,
        "seed": None,  # None: follow the run seed
        "modalities": [
            {"feature_dim": 16, "snr": 0.6, "informative_fraction": 1.0},
            {"feature_dim": 16, "snr": 0.15, "informative_fraction": 1.0},
        ],
    },
    "encoders": {
        "hidden": None,  # None: one hidden layer of 32 units per modality
        "activation": "relu",
        "head_hidden": [],
    },
    "fusion": {"kind": "gated_dyncim", "renormalize": False},
    "curriculum": {
        "sdc_enabled": True,
        "mdc_enabled": True,
        "metrics_enabled": {"loss": True, "consistency": True, "stability": True},
        "measures_enabled": {"gmr": True, "hmir": True},
        "gating_enabled": True,
        "gamma": 0.995,
        "gate_threshold": 0.5,
        "mu": 1.0,
        "orientation": {"loss": 1, "consistency": 1, "stability": 1},
        "task_loss": "composite",
        "normalize_weights": True,
    },
    "schedule": {"eta0": None, "growth": 0.1, "kind": "linear"},
}

_MODALITY_KEYS = {"feature_dim", "snr", "informative_fraction"}


def _merge(base, override, path):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"{where}: unknown field")
        if isinstance(base[key], dict) and base[key] and not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        if isinstance(base[key], dict) and base[key]:
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _num(cfg, dotted, kind=float, low=None, high=None, low_open=False, high_open=False, allow_none=False):
    node = cfg
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node[p]
    value = node[leaf]
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{dotted}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{dotted}: expected an integer, got {value!r}")
    value = kind(value)
    if low is not None and (value < low or (low_open and value == low)):
        raise ConfigError(f"{dotted}: {value} is below the allowed range")
    if high is not None and (value > high or (high_open and value == high)):
        raise ConfigError(f"{dotted}: {value} is above the allowed range")
    node[leaf] = value


def _flag(cfg, dotted):
    node = cfg
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node[p]
    if not isinstance(node[leaf], bool):
        raise ConfigError(f"{dotted}: expected true/false, got {node[leaf]!r}")


def resolve(raw: dict | None) -> dict:
    """Merge ``raw`` onto the defaults and validate every field."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    cfg = _merge(DEFAULTS, raw, "")

    _num(cfg, "seed", int, 0)
    _num(cfg, "epochs", int, 1)
    _num(cfg, "batch_size", int, 1)
    _num(cfg, "lr", float, 0)

    ds = cfg["dataset"]
    _num(cfg, "dataset.n_samples", int, 2)
    _num(cfg, "dataset.n_classes", int, 2)
    _num(cfg, "dataset.sample_noise_spread", float, 0)
    _num(cfg, "dataset.seed", int, 0, allow_none=True)
    if not isinstance(ds["modalities"], list) or not ds["modalities"]:
        raise ConfigError("dataset.modalities: expected a non-empty list")
    mods = []
    for i, mod in enumerate(ds["modalities"]):
        where = f"dataset.modalities[{i}]"
        if not isinstance(mod, dict):
            raise ConfigError(f"{where}: expected a mapping")
        extra = set(mod) - _MODALITY_KEYS
        if extra:
            raise ConfigError(f"{where}.{sorted(extra)[0]}: unknown field")
        mod = {"snr": 1.0, "informative_fraction": 1.0, **mod}
        if "feature_dim" not in mod:
            raise ConfigError(f"{where}.feature_dim: required")
        holder = {"m": mod}
        _num(holder, "m.feature_dim", int, 1)
        try:
            _num(holder, "m.snr", float, 0)
            _num(holder, "m.informative_fraction", float, 0, 1)
        except ConfigError as exc:
            raise ConfigError(str(exc).replace("m.", f"{where}.", 1)) from None
        mods.append(mod)
    ds["modalities"] = mods
    n_mod = len(mods)

    enc = cfg["encoders"]
    if enc["hidden"] is None:
        enc["hidden"] = [[32] for _ in range(n_mod)]
    if (not isinstance(enc["hidden"], list) or len(enc["hidden"]) != n_mod
            or not all(isinstance(h, list) and all(isinstance(u, int) and u > 0 for u in h) for h in enc["hidden"])):
        raise ConfigError(f"encoders.hidden: expected {n_mod} lists of positive widths")
    if enc["activation"] not in ("relu", "tanh"):
        raise ConfigError("encoders.activation: expected relu or tanh")
    if not isinstance(enc["head_hidden"], list) or not all(isinstance(u, int) and u > 0 for u in enc["head_hidden"]):
        raise ConfigError("encoders.head_hidden: expected a list of positive widths")

    if cfg["fusion"]["kind"] not in KINDS:
        raise ConfigError(f"fusion.kind: expected one of {', '.join(KINDS)}")
    _flag(cfg, "fusion.renormalize")

    cur = cfg["curriculum"]
    for name in ("sdc_enabled", "mdc_enabled", "gating_enabled", "normalize_weights"):
        _flag(cfg, f"curriculum.{name}")
    for name in ("loss", "consistency", "stability"):
        _flag(cfg, f"curriculum.metrics_enabled.{name}")
        if cur["orientation"][name] not in (1, -1):
            raise ConfigError(f"curriculum.orientation.{name}: expected 1 or -1")
    for name in ("gmr", "hmir"):
        _flag(cfg, f"curriculum.measures_enabled.{name}")
    _num(cfg, "curriculum.gamma", float, 0, 1, high_open=True)
    _num(cfg, "curriculum.gate_threshold", float, 0, 1, low_open=True, high_open=True)
    _num(cfg, "curriculum.mu", float, 0, low_open=True)
    if cur["task_loss"] not in ("composite", "fused"):
        raise ConfigError("curriculum.task_loss: expected composite or fused")
    if cur["sdc_enabled"] and not any(cur["metrics_enabled"].values()):
        raise ConfigError("curriculum.metrics_enabled: at least one metric must be on while SDC is enabled")
    if cur["mdc_enabled"] and not any(cur["measures_enabled"].values()):
        raise ConfigError("curriculum.measures_enabled: at least one measure must be on while MDC is enabled")

    _num(cfg, "schedule.eta0", float, 0, low_open=True, allow_none=True)
    _num(cfg, "schedule.growth", float, 0, low_open=True)
    if cfg["schedule"]["kind"] not in ("linear", "exponential"):
        raise ConfigError("schedule.kind: expected linear or exponential")
    return cfg


def load(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return resolve(raw)


def dataset_spec(cfg) -> DatasetSpec:
    ds = cfg["dataset"]
    seed = cfg["seed"] if ds["seed"] is None else ds["seed"]
    return DatasetSpec(ds["n_samples"], ds["n_classes"], tuple(ModalitySpec(**m) for m in ds["modalities"]),
                       ds["sample_noise_spread"], seed)


def fusion_strategy(cfg) -> FusionStrategy:
    cur = cfg["curriculum"]
    return FusionStrategy(cfg["fusion"]["kind"], cur["gate_threshold"], cur["mu"], cfg["fusion"]["renormalize"])


def curriculum_settings(cfg) -> CurriculumSettings:
    cur = cfg["curriculum"]
    me = cur["metrics_enabled"]
    o = cur["orientation"]
    return CurriculumSettings(
        sdc_enabled=cur["sdc_enabled"],
        mdc_enabled=cur["mdc_enabled"],
        metrics_enabled=(me["loss"], me["consistency"], me["stability"]),
        use_gmr=cur["measures_enabled"]["gmr"],
        use_hmir=cur["measures_enabled"]["hmir"],
        gating_enabled=cur["gating_enabled"],
        gamma=cur["gamma"],
        orientation=MetricOrientation(o["loss"], o["consistency"], o["stability"]),
        task_loss=cur["task_loss"],
        normalize_weights=cur["normalize_weights"],
    )


def eta_schedule(cfg) -> EtaSchedule:
    s = cfg["schedule"]
    return EtaSchedule(s["eta0"], s["growth"], s["kind"])


def leaf_paths(tree=DEFAULTS, prefix=""):
    for key, value in tree.items():
        path = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict) and value:
            yield from leaf_paths(value, path)
        else:
            yield path


def resolve_axis(name: str) -> str:
    """Expand a short axis name such as ``sdc_enabled`` to its dotted path."""
    paths = list(leaf_paths())
    if name in paths:
        return name
    hits = [p for p in paths if p.endswith("." + name)]
    if len(hits) == 1:
        return hits[0]
    if not hits:
        raise ConfigError(f"{name}: not a config field")
    raise ConfigError(f"{name}: ambiguous, use one of {', '.join(hits)}")


def set_path(raw: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(raw)
    node = out
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node.setdefault(p, {})
    node[leaf] = value
    return out

