"""Command line entry point: ``dyncim run|ablate|sweep-gamma``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .experiment import ablate, parse_grid, run_config, sweep_gamma, write_run, write_table
from .trainer import NumericAbort

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("dyncim")


def _base(args) -> dict:
    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        cfg = cfgmod.resolve(cfgmod.set_path(cfg, "seed", args.seed))
    return cfg


def _cmd_run(args):
    cfg = _base(args)
    result = run_config(cfg)
    out = write_run(result, args.out)
    log.info("test accuracy %.4f -> %s", result.final_test_accuracy, out)
    print(out)


def _cmd_ablate(args):
    cfg = _base(args)
    header, rows = ablate(cfg, parse_grid(args.grid), jobs=args.jobs)
    print(write_table(Path(args.out) / "ablation.csv", header, rows))


def _cmd_sweep(args):
    cfg = _base(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise cfgmod.ConfigError(f"--values: cannot parse {args.values!r}") from None
    if not values:
        raise cfgmod.ConfigError("--values: need at least one gamma")
    header, rows = sweep_gamma(cfg, values, jobs=args.jobs)
    print(write_table(Path(args.out) / "sweep.csv", header, rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyncim", description="Dynamic curriculum multimodal experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--out", default="runs", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("run", help="train one configuration")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ablate", help="cross-product of config axes")
    common(p)
    p.add_argument("--grid", action="append", default=[],
                   help="axis spec name=v1,v2 (repeatable, or ';'-separated)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("sweep-gamma", help="one run per EMA smoothing factor")
    common(p)
    p.add_argument("--values", required=True, help="comma-separated gammas in [0, 1)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
