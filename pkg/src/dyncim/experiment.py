"""Experiment runs, ablation grids and gamma sweeps with CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import config as cfgmod
from .synth_data import generate, train_test_split
from .trainer import TrainRecord, TrainState, accuracy, build_state, iterate_batches, train_epoch

DIFFICULTY_COLUMNS = ["sample_id", "true_difficulty", "d_task", "d_fuse", "v"]


def records_columns(n_modalities: int) -> list[str]:
    cols = ["epoch", "mean_loss", "accuracy", "mean_v", "mean_d_task", "mean_d_fuse",
            "psi_loss", "psi_consistency", "psi_stability"]
    for m in range(n_modalities):
        cols += [f"gate_{m}", f"gain_{m}", f"omega_{m}"]
    return cols + ["modality_alignment"]


@dataclass
class RunResult:
    config: dict
    records: list[TrainRecord]
    state: TrainState
    final_train_accuracy: float
    final_test_accuracy: float
    difficulty: dict  # column -> array, final-epoch per-sample values on the training split
    wall_seconds: float

    @property
    def n_modalities(self) -> int:
        return len(self.state.encoders)


def run_config(cfg: dict) -> RunResult:
    """Train one configuration end to end. ``cfg`` must already be resolved."""
    start = time.perf_counter()
    spec = cfgmod.dataset_spec(cfg)
    train, test = train_test_split(generate(spec), seed=spec.seed)
    fusion = cfgmod.fusion_strategy(cfg)
    settings = cfgmod.curriculum_settings(cfg)
    state = build_state(train.dims, train.n_classes, cfg["encoders"]["hidden"], fusion, settings,
                        cfgmod.eta_schedule(cfg), cfg["seed"], cfg["encoders"]["activation"],
                        cfg["encoders"]["head_hidden"])
    records = []
    for t in range(cfg["epochs"]):
        rng = np.random.default_rng([cfg["seed"], t])
        state, rec = train_epoch(state, fusion, iterate_batches(train, cfg["batch_size"], rng), t, settings,
                                 cfg["lr"])
        records.append(rec)
    last = records[-1].per_sample
    order = np.argsort(last["sample_id"])
    ids = last["sample_id"][order]
    pos = np.searchsorted(train.sample_ids, ids)
    difficulty = {
        "sample_id": ids,
        "true_difficulty": train.true_difficulty[pos],
        "d_task": last["d_task"][order],
        "d_fuse": last["d_fuse"][order],
        "v": last["v"][order],
    }
    return RunResult(cfg, records, state, accuracy(state, fusion, settings, train),
                     accuracy(state, fusion, settings, test), difficulty, time.perf_counter() - start)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def records_csv(result: RunResult) -> str:
    return _csv_text(records_columns(result.n_modalities), [r.row() for r in result.records])


def difficulty_csv(result: RunResult) -> str:
    d = result.difficulty
    rows = zip(*(d[c] for c in DIFFICULTY_COLUMNS))
    return _csv_text(DIFFICULTY_COLUMNS, rows)


def summary(result: RunResult) -> dict:
    last = result.records[-1]
    return {
        "config": result.config,
        "final_train_accuracy": result.final_train_accuracy,
        "final_test_accuracy": result.final_test_accuracy,
        "epochs_run": len(result.records),
        "seed": result.config["seed"],
        "wall_seconds": result.wall_seconds,
        "diagnostics": {
            "eta0_resolved": result.state.schedule.eta0,
            "final_mean_d_gmr": last.mean_d_gmr,
            "final_mean_inverse_d_gmr": 1.0 / last.mean_d_gmr,
            "final_mean_d_hmir": last.mean_d_hmir,
            "inference_fusion_weights": None if result.state.fusion_weights is None
            else [float(w) for w in result.state.fusion_weights],
        },
    }


def write_run(result: RunResult, out_dir) -> Path:
    """Write the three report files into ``out_dir`` via a temporary sibling directory."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    (tmp / "records.csv").write_text(records_csv(result))
    (tmp / "difficulty.csv").write_text(difficulty_csv(result))
    (tmp / "summary.json").write_text(json.dumps(summary(result), indent=2, sort_keys=True) + "\n")
    if out_dir.exists():
        shutil.rmtree(out_dir)
    os.replace(tmp, out_dir)
    return out_dir


def parse_grid(specs) -> list[tuple[str, list]]:
    """Parse ``["sdc_enabled=true,false", "mdc_enabled=true,false"]`` (``;`` also separates axes)."""
    axes = []
    for spec in specs or []:
        for part in filter(None, (p.strip() for p in spec.split(";"))):
            if "=" not in part:
                raise cfgmod.ConfigError(f"grid axis {part!r}: expected name=v1,v2,...")
            name, values = part.split("=", 1)
            path = cfgmod.resolve_axis(name.strip())
            vals = [yaml.safe_load(v.strip()) for v in values.split(",") if v.strip()]
            if not vals:
                raise cfgmod.ConfigError(f"grid axis {name}: no values")
            axes.append((path, vals))
    return axes


def grid_configs(base: dict, axes) -> list[tuple[dict, dict]]:
    """Resolved config for every cell of the cross product, with its axis values."""
    cells = []
    names = [a for a, _ in axes]
    for combo in itertools.product(*(vals for _, vals in axes)):
        raw = base
        for path, value in zip(names, combo):
            raw = cfgmod.set_path(raw, path, value)
        cells.append((dict(zip(names, combo)), cfgmod.resolve(raw)))
    return cells


def _run_many(configs, jobs):
    if jobs <= 1 or len(configs) <= 1:
        return [run_config(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_config, configs))


def ablate(base: dict, axes, jobs: int = 1) -> tuple[list[str], list[list]]:
    cells = grid_configs(base, axes)
    results = _run_many([c for _, c in cells], jobs)
    header = [a for a, _ in axes] + ["final_train_accuracy", "final_test_accuracy"]
    rows = [list(vals.values()) + [r.final_train_accuracy, r.final_test_accuracy]
            for (vals, _), r in zip(cells, results)]
    return header, rows


def sweep_gamma(base: dict, values, jobs: int = 1) -> tuple[list[str], list[list]]:
    for g in values:
        if not 0.0 <= g < 1.0:
            raise cfgmod.ConfigError(f"gamma {g}: must lie in [0, 1)")
    configs = [cfgmod.resolve(cfgmod.set_path(base, "curriculum.gamma", float(g))) for g in values]
    results = _run_many(configs, jobs)
    header = ["gamma", "final_train_accuracy", "final_test_accuracy"]
    return header, [[float(g), r.final_train_accuracy, r.final_test_accuracy] for g, r in zip(values, results)]


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(_csv_text(header, rows))
    os.replace(tmp, path)
    return path
