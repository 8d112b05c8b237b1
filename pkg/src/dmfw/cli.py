"""Command-line experiment runner.

Subcommands: ``run``, ``sweep``, ``validate`` and ``report``. Exit codes are
0 on success, 1 when a validation check fails, 2 for usage or config errors
and 3 when a runtime invariant breaks mid-run.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .exceptions import ConfigError, ConstructionError, InvariantViolation, NumericError
from .experiment import (SWEEP_KEYS, build_stream, dump_config, expand_sweep, load_config,
                         run_centralized_baseline, run_experiment)
from .metrics import format_real, rate_fit

__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_validate", "cmd_report"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_INVARIANT = 3


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _load(config_path, out=None, seed=None):
    spec = load_config(config_path)
    overrides = {}
    if out is not None:
        overrides["output_dir"] = out
    if seed is not None:
        overrides["master_seed"] = seed
    if overrides:
        spec.base = replace(spec.base, **overrides)
    return spec


def _execute_point(cfg):
    """Run one config and write its outputs; returns (name, final row)."""
    run_dir = os.path.join(cfg.output_dir, cfg.name)
    os.makedirs(run_dir, exist_ok=True)
    stream = build_stream(cfg)
    if cfg.mode == "centralized_baseline":
        series = run_centralized_baseline(cfg, stream)
    else:
        series = run_experiment(cfg, stream)
    series.write_csv(os.path.join(run_dir, "metrics.csv"))
    series.write_diagnostics_csv(os.path.join(run_dir, "diagnostics.csv"))
    with open(os.path.join(run_dir, "resolved_config.ini"), "w") as fh:
        fh.write(dump_config(cfg))
    if cfg.with_baseline and cfg.mode != "centralized_baseline":
        run_centralized_baseline(cfg, stream).write_csv(os.path.join(run_dir, "baseline_metrics.csv"))
    last = series[-1]
    return cfg.name, last.mean_gap_running, last.mean_loss_running


def cmd_run(config_path, out=None, seed=None):
    try:
        spec = _load(config_path, out, seed)
    except ConfigError as exc:
        _err(f"{config_path}: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _err(str(exc))
        return EXIT_USAGE
    try:
        name, *_ = _execute_point(spec.base)
    except ConstructionError as exc:
        _err(f"construction failed: {exc}")
        return EXIT_USAGE
    except (InvariantViolation, NumericError) as exc:
        _err(f"invariant violation: {exc}")
        return EXIT_INVARIANT
    print(f"wrote {os.path.join(spec.output_dir, name)}")
    return EXIT_OK


def cmd_sweep(config_path, out=None, seed=None, jobs=1):
    try:
        spec = _load(config_path, out, seed)
    except ConfigError as exc:
        _err(f"{config_path}: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _err(str(exc))
        return EXIT_USAGE
    if not spec.sweep:
        return cmd_run(config_path, out, seed)
    points = expand_sweep(spec)
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_execute_point, points))
        else:
            results = [_execute_point(p) for p in points]
    except ConstructionError as exc:
        _err(f"construction failed: {exc}")
        return EXIT_USAGE
    except (InvariantViolation, NumericError) as exc:
        _err(f"invariant violation: {exc}")
        return EXIT_INVARIANT
    keys = [k for k in SWEEP_KEYS if k in spec.sweep]
    field_of = {"topology_kind": "topology_kind", "n": "n", "seed": "master_seed",
                "oracle_kind": "oracle_kind", "mode": "mode", "alpha": "alpha"}
    os.makedirs(spec.output_dir, exist_ok=True)
    summary = os.path.join(spec.output_dir, "summary.csv")
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", *keys, "final_gap_running", "final_loss_running"])
        for cfg, (name, gap, loss) in zip(points, results):
            values = [getattr(cfg, field_of[k]) for k in keys]
            w.writerow([name, *(format_real(v) if isinstance(v, float) else v for v in values),
                        format_real(gap), format_real(loss)])
    print(f"wrote {len(points)} runs and {summary}")
    return EXIT_OK


def cmd_validate(matrix_factory=None):
    from .checks import run_validation_suite

    results = run_validation_suite(matrix_factory=matrix_factory)
    ok = True
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'} {name}" + ("" if passed else f": {detail}"))
        ok &= passed
    return EXIT_OK if ok else EXIT_VALIDATION


def _read_metrics(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def _slope_text(t, values):
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if keep.sum() < 5:
        return "insufficient data"
    return format_real(rate_fit(t[keep], values[keep]))


def cmd_report(run_dir, baseline=None):
    metrics_path = os.path.join(run_dir, "metrics.csv")
    if not os.path.isfile(metrics_path):
        _err(f"missing {metrics_path}")
        return EXIT_USAGE
    rows = _read_metrics(metrics_path)
    t = [int(r["t"]) for r in rows]
    gap = [float(r["mean_gap_running"]) for r in rows]
    loss = [float(r["mean_loss"]) for r in rows]
    loss_run = [float(r["mean_loss_running"]) for r in rows]

    with open(os.path.join(run_dir, "plotdata_gap.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["log_t", "log_gap_running"])
        for ti, g in zip(t, gap):
            if g > 0:
                w.writerow([format_real(math.log(ti)), format_real(math.log(g))])
    with open(os.path.join(run_dir, "plotdata_loss.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean_loss", "mean_loss_running"])
        for ti, a, b in zip(t, loss, loss_run):
            w.writerow([ti, format_real(a), format_real(b)])

    print(f"gap_slope: {_slope_text(t, gap)}")
    print(f"loss_slope: {_slope_text(t, loss_run)}")

    if baseline is None and os.path.isfile(os.path.join(run_dir, "baseline_metrics.csv")):
        baseline = os.path.join(run_dir, "baseline_metrics.csv")
    elif baseline is not None and os.path.isdir(baseline):
        baseline = os.path.join(baseline, "metrics.csv")
    if baseline is not None:
        if not os.path.isfile(baseline):
            _err(f"missing {baseline}")
            return EXIT_USAGE
        base_rows = _read_metrics(baseline)
        if len(base_rows) != len(rows):
            _err(f"baseline has {len(base_rows)} rows, run has {len(rows)}")
            return EXIT_USAGE
        ratio_path = os.path.join(run_dir, "plotdata_ratio.csv")
        ratios = []
        with open(ratio_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "ratio"])
            for ti, dec, br in zip(t, loss_run, base_rows):
                b = float(br["mean_loss_running"])
                r = dec / b if b > 0 else float("nan")
                ratios.append(r)
                w.writerow([ti, format_real(r)])
        finite = [r for r in ratios if math.isfinite(r)]
        print(f"ratio_max: {format_real(max(finite)) if finite else 'nan'}")
        print(f"ratio_final: {format_real(ratios[-1])}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dmfw", description="Decentralized Meta Frank-Wolfe experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=1)
    sub.add_parser("validate")
    p = sub.add_parser("report")
    p.add_argument("run_dir", nargs="?")
    p.add_argument("--out", help="run directory (alternative to the positional argument)")
    p.add_argument("--baseline", help="baseline run directory or metrics.csv")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed)
    if args.command == "sweep":
        if args.jobs < 1:
            _err("--jobs must be >= 1")
            return EXIT_USAGE
        return cmd_sweep(args.config, args.out, args.seed, args.jobs)
    if args.command == "validate":
        return cmd_validate()
    run_dir = args.run_dir or args.out
    if run_dir is None:
        _err("report needs a run directory")
        return EXIT_USAGE
    return cmd_report(run_dir, args.baseline)


if __name__ == "__main__":
    sys.exit(main())
