"""Command line entry point: ``pso-forecast <command> [options]``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric
divergence in a phase that cannot recover from it.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import DataError, NumericError, ValidationError

log = logging.getLogger("pso_forecast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value run configuration")
    common.add_argument("--scenario", action="append", choices=("daily", "weekly", "monthly"),
                        help="scenario to run (repeatable)")
    common.add_argument("--family", action="append", choices=("mlp", "lstm", "cnn"),
                        help="model family to run (repeatable)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    common.add_argument("--fast-search", action="store_true", default=None,
                        help="cap training epochs at the search epoch cap (default 10) while searching/sweeping")
    common.add_argument("--out", help="output directory")
    common.add_argument("--data", help="'bundled', 'full' or a path to the UCI CSV")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="pso-forecast", description="PSO-tuned neural forecasters for hourly PM2.5.")
    sub = parser.add_subparsers(dest="command", required=True)
    fetch = sub.add_parser("fetch", parents=[common], help="download and cache the full dataset")
    fetch.add_argument("--url", help="download from this URL only")
    sub.add_parser("preprocess", parents=[common], help="write the cleaned matrix and normalizers")
    sub.add_parser("sweep", parents=[common], help="baseline hidden-layer sweep")
    sub.add_parser("tune", parents=[common], help="PSO hyperparameter tuning")
    sub.add_parser("report", parents=[common], help="tables and charts from finished runs")
    sub.add_parser("all", parents=[common], help="preprocess, sweep, tune and report")
    return parser


def _run_config(args):
    from .experiment import RunConfig, load_config

    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.scenario:
        overrides["scenarios"] = tuple(dict.fromkeys(args.scenario))
    if args.family:
        overrides["families"] = tuple(dict.fromkeys(args.family))
    for name in ("seed", "workers", "out", "data"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.fast_search:
        overrides["fast_search"] = True
    if getattr(args, "url", None):
        overrides["url"] = args.url
    return replace(cfg, **overrides)


def cmd_fetch(cfg):
    from .fetch import default_cache_dir, fetch_dataset

    path = fetch_dataset(cfg.url, Path(cfg.cache_dir) if cfg.cache_dir else default_cache_dir())
    print(path)


def cmd_preprocess(cfg):
    from .experiment import check_writable, load_features
    from .pipeline import make_scenario, write_feature_csv

    outdir = check_writable(cfg.outdir)
    features = load_features(cfg)
    write_feature_csv(features, outdir / "cleaned.csv")
    for scenario in cfg.scenarios:
        ds = make_scenario(features, scenario, cfg.lookback)
        ds.normalizer.save(outdir / f"normalizer_{scenario}.txt")
        print(f"{scenario}: {len(ds.train_y)} training windows, {len(ds.test_y)} test windows")
    print(f"{len(features)} cleaned rows ({features.dropped} dropped) -> {outdir / 'cleaned.csv'}")


def cmd_sweep(cfg):
    from .experiment import run_baseline_sweep

    run_baseline_sweep(cfg)


def cmd_tune(cfg):
    from .experiment import run_tuning
    from .report import table2_text

    outcomes = run_tuning(cfg)
    print(table2_text([dict(family=o.family, scenario=o.scenario, **o.values) for o in outcomes]), end="")


def cmd_report(cfg):
    from .report import emit_report, load_results

    for path in emit_report(load_results(cfg.outdir), cfg.outdir, cfg):
        print(path)


def cmd_all(cfg):
    if cfg.data == "full":
        cmd_fetch(cfg)
    cmd_preprocess(cfg)
    cmd_sweep(cfg)
    cmd_tune(cfg)
    cmd_report(cfg)


COMMANDS = {"fetch": cmd_fetch, "preprocess": cmd_preprocess, "sweep": cmd_sweep, "tune": cmd_tune,
            "report": cmd_report, "all": cmd_all}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = _run_config(args)
        if args.command != "fetch":
            from .experiment import check_writable

            check_writable(cfg.outdir)
        COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
