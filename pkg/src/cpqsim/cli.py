"""Command-line driver: ``run``, ``sweep``, ``analyze`` and ``oracle``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

from .config import ENV_CONFIG, PROFILES, ConfigError, ExperimentConfig, parse_assignment, parse_config_text
from .core import TraceParseError, load_trace
from .experiment import SweepSpec, dumps_sweep, run_experiment, sweep, write_outputs
from .gamma import (
    DEFAULT_THRESHOLD_US, MAX_ORACLE_OPS, DanglingValueError, analyze, insert_synthetic_initial_writes,
    key_gamma, min_stretch_oracle,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("cpqsim")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    for item in args.set or []:
        try:
            key, value = parse_assignment(item)
        except ConfigError as exc:
            raise CliError(str(exc), EXIT_USAGE) from None
        overrides[key] = value
    path = args.config or os.environ.get(ENV_CONFIG)
    file_values = {}
    if path:
        try:
            file_values = parse_config_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}", EXIT_IO) from None
    try:
        return ExperimentConfig.build(args.profile, file_values, overrides)
    except ConfigError as exc:
        raise CliError(f"invalid config: {exc}", EXIT_USAGE) from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _read_trace(path: str):
    try:
        return load_trace(path)
    except OSError as exc:
        raise CliError(f"cannot read trace {path}: {exc}", EXIT_IO) from None
    except TraceParseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_USAGE) from None


def cmd_run(args) -> int:
    cfg = _load_config(args)
    trace_path = args.trace or cfg["out.trace"]
    report_path = args.report or cfg["out.report"]
    try:
        trace, report = run_experiment(cfg)
    except ConfigError as exc:
        raise CliError(f"invalid config: {exc}", EXIT_USAGE) from None
    try:
        write_outputs(trace, report, trace_path, report_path)
    except OSError as exc:
        raise CliError(f"cannot write outputs: {exc}", EXIT_IO) from None
    lat = report.latency
    print(
        f"{report.policy}: {lat.ops} ops, {lat.throughput_ops_s:.1f} ops/s, "
        f"read p95 {lat.read.p95_us} us, write p95 {lat.write.p95_us} us, "
        f"proportion positive {report.score.proportion_positive:.5f}"
        + (" [throughput shortfall]" if report.throughput_shortfall else "")
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = tuple(v.strip() for v in args.values.split(",") if v.strip())
    try:
        spec = SweepSpec(args.param, values, args.seeds)
        rows = sweep(cfg, spec, jobs=args.jobs, points_dir=args.points_dir)
    except ConfigError as exc:
        raise CliError(f"invalid sweep: {exc}", EXIT_USAGE) from None
    except OSError as exc:
        raise CliError(f"cannot write sweep outputs: {exc}", EXIT_IO) from None
    text = dumps_sweep(rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze(args) -> int:
    trace = _read_trace(args.trace)
    report = analyze(trace, args.threshold)
    text = json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    trace = insert_synthetic_initial_writes(_read_trace(args.trace))
    by_key = defaultdict(list)
    for rec in trace.records:
        by_key[rec.key].append(rec)
    agree = disagree = skipped = 0
    for key in sorted(by_key):
        ops = by_key[key]
        if len(ops) > MAX_ORACLE_OPS:
            skipped += 1
            print(f"key {key}: skipped ({len(ops)} ops exceeds oracle limit {MAX_ORACLE_OPS})")
            continue
        try:
            delta = min_stretch_oracle(ops)
            zone = key_gamma(ops)
        except (ValueError, DanglingValueError) as exc:
            raise CliError(f"key {key}: {exc}", EXIT_USAGE) from None
        verdict = "agree" if delta == zone else "DISAGREE"
        agree += delta == zone
        disagree += delta != zone
        print(f"key {key}: ops {len(ops)} delta_us {delta} zone_gamma_us {zone} {verdict}")
    print(f"summary: {agree} agree, {disagree} disagree, {skipped} skipped")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpqsim",
        description="Simulate consistency-latency tuning on a quorum-replicated store.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_args(p):
        p.add_argument("--config", help=f"INI-style config file (default: ${ENV_CONFIG})")
        p.add_argument("--profile", default="desk", choices=sorted(PROFILES))
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    p = sub.add_parser("run", help="simulate one configuration")
    config_args(p)
    p.add_argument("--trace", help="trace CSV path (default: out.trace)")
    p.add_argument("--report", help="report JSON path (default: out.report)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep and emit CSV rows")
    config_args(p)
    p.add_argument("--param", required=True, help="config key to vary, e.g. policy.p")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", type=int, default=1, help="seeds per point")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--points-dir", help="directory for per-point traces and reports")
    p.add_argument("-j", "--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="compute per-value Gamma scores of a trace")
    p.add_argument("trace")
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD_US, help="noise threshold in us")
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle", help="brute-force minimal stretch per key")
    p.add_argument("trace")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"cpqsim: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
