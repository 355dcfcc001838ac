"""Single runs and parameter sweeps over :class:`ExperimentConfig`."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .core import Trace, dumps_trace
from .gamma import analyze
from .metrics import RunReport, sla_check, summarize
from .workload import Simulation

log = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "param", "value", "seed", "policy", "proportion_positive", "proportion_positive_reads",
    "read_p95_us", "write_p95_us", "throughput_ops_s", "throughput_shortfall",
)


def simulate(cfg: ExperimentConfig, keep_ledger: bool = False) -> tuple[Trace, Simulation]:
    workload = cfg.workload()
    sim = Simulation(
        workload, cfg.policy(), seed=cfg.seed, hosts=cfg.hosts, rf=cfg.rf,
        network=cfg.network(), read_repair=cfg.read_repair, keep_ledger=keep_ledger,
    )
    trace = sim.run()
    trace.metadata["config_digest"] = cfg.digest()
    return trace, sim


def report_for(trace: Trace, cfg: ExperimentConfig) -> RunReport:
    stats = summarize(trace, per_host=cfg.per_host_p95)
    scores = analyze(trace, cfg.threshold_us)
    sla = cfg.sla()
    policy = cfg.policy()
    return RunReport(
        latency=stats,
        score=scores,
        target_ops_s=cfg.workload().target_ops_per_host_per_s * cfg.hosts,
        sla=sla,
        sla_verdicts=sla_check(stats, scores, sla) if sla else None,
        config_digest=cfg.digest(),
        seed=cfg.seed,
        policy=policy.label,
    )


def run_experiment(cfg: ExperimentConfig) -> tuple[Trace, RunReport]:
    trace, sim = simulate(cfg)
    report = report_for(trace, cfg)
    if report.throughput_shortfall:
        log.warning("throughput %.1f ops/s is below target %.1f ops/s",
                    report.latency.throughput_ops_s, report.target_ops_s)
    return trace, report


def dumps_report(report: RunReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"


def write_outputs(trace: Trace, report: RunReport, trace_path: str | Path | None,
                  report_path: str | Path | None) -> None:
    if trace_path:
        Path(trace_path).write_text(dumps_trace(trace), encoding="utf-8")
    if report_path:
        Path(report_path).write_text(dumps_report(report), encoding="utf-8")


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple[str, ...]
    seeds: int = 1

    def __post_init__(self):
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.seeds < 1:
            raise ConfigError("sweep needs at least one seed per point")

    def points(self, base: ExperimentConfig) -> list[ExperimentConfig]:
        """One config per (value, seed); seeds count up from the base seed."""
        if self.param not in base.values:
            raise ConfigError(f"unknown sweep parameter {self.param!r}")
        return [
            base.with_overrides({self.param: value, "run.seed": str(base.seed + i)})
            for value in self.values
            for i in range(self.seeds)
        ]


def sweep_row(param: str, cfg: ExperimentConfig, report: RunReport) -> dict:
    lat = report.latency
    return {
        "param": param,
        "value": cfg[param],
        "seed": cfg.seed,
        "policy": report.policy,
        "proportion_positive": report.score.proportion_positive,
        "proportion_positive_reads": report.score.proportion_positive_reads,
        "read_p95_us": lat.read.p95_us,
        "write_p95_us": lat.write.p95_us,
        "throughput_ops_s": lat.throughput_ops_s,
        "throughput_shortfall": report.throughput_shortfall,
    }


def _run_point(args) -> tuple[dict, str, str]:
    param, cfg = args
    trace, report = run_experiment(cfg)
    return sweep_row(param, cfg, report), dumps_trace(trace), dumps_report(report)


def sweep(base: ExperimentConfig, spec: SweepSpec, jobs: int = 1,
          points_dir: str | Path | None = None) -> list[dict]:
    """Run every sweep point; optionally keep each point's trace and report."""
    configs = spec.points(base)
    work = [(spec.param, cfg) for cfg in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, work))
    else:
        results = [_run_point(w) for w in work]
    if points_dir is not None:
        out = Path(points_dir)
        out.mkdir(parents=True, exist_ok=True)
        for row, trace_text, report_text in results:
            stem = f"{spec.param}={row['value']}_seed{row['seed']}"
            (out / f"{stem}.trace.csv").write_text(trace_text, encoding="utf-8")
            (out / f"{stem}.report.json").write_text(report_text, encoding="utf-8")
    return [row for row, _, _ in results]


def dumps_sweep(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
