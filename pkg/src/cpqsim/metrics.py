"""Latency/throughput summaries, SLA evaluation and the run report."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from statistics import fmean

from .core import OpKind, Trace
from .gamma import ScoreReport


def percentile(samples, q: float) -> int | float:
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest sample."""
    if not samples:
        raise ValueError("percentile of an empty sample")
    if not 0 < q <= 100:
        raise ValueError(f"percentile rank must lie in (0, 100], got {q}")
    ordered = sorted(samples)
    rank = math.ceil(round(q * len(ordered) / 100, 9))
    return ordered[max(rank, 1) - 1]


@dataclass
class KindStats:
    count: int = 0
    mean_us: float | None = None
    p50_us: float | None = None
    p95_us: float | None = None
    p99_us: float | None = None
    max_us: float | None = None

    @classmethod
    def from_samples(cls, samples: list[int]) -> "KindStats":
        if not samples:
            return cls()
        ordered = sorted(samples)
        return cls(
            count=len(ordered),
            mean_us=fmean(ordered),
            p50_us=percentile(ordered, 50),
            p95_us=percentile(ordered, 95),
            p99_us=percentile(ordered, 99),
            max_us=ordered[-1],
        )


@dataclass
class LatencyStats:
    read: KindStats
    write: KindStats
    throughput_ops_s: float
    ops: int
    duration_s: float


def transaction_records(trace: Trace):
    """Records of the transaction phase (load-phase writes are excluded)."""
    load_ops = int(trace.metadata.get("load_ops", 0))
    return [r for r in trace.records if r.op_id >= load_ops]


def _per_host_p95(records, hosts: int) -> float | None:
    by_host: dict[int, list[int]] = {}
    for r in records:
        by_host.setdefault(r.client_id % hosts, []).append(r.latency)
    if not by_host:
        return None
    return fmean(percentile(v, 95) for v in by_host.values())


def summarize(trace: Trace, per_host: bool = False) -> LatencyStats:
    """Latency per kind (inclusive of injected delays) and achieved throughput.

    With ``per_host`` the p95 of each kind is the mean of per-host p95s
    instead of the global nearest-rank value.
    """
    records = transaction_records(trace)
    reads = [r for r in records if r.kind is OpKind.READ]
    writes = [r for r in records if r.kind is OpKind.WRITE]
    read = KindStats.from_samples([r.latency for r in reads])
    write = KindStats.from_samples([r.latency for r in writes])
    if per_host:
        hosts = int(trace.metadata.get("hosts", 1))
        read.p95_us = _per_host_p95(reads, hosts)
        write.p95_us = _per_host_p95(writes, hosts)
    if "duration_us" in trace.metadata:
        duration_s = int(trace.metadata["duration_us"]) / 1e6
    elif records:
        duration_s = (max(r.response for r in records) - min(r.invoke for r in records)) / 1e6
    else:
        duration_s = 0.0
    throughput = len(records) / duration_s if duration_s > 0 else 0.0
    return LatencyStats(read, write, throughput, len(records), duration_s)


@dataclass(frozen=True)
class SlaSpec:
    """Read p95 latency bound ``L_ms`` and stale-read fraction bound ``X``."""

    L_ms: float
    X: float

    def __post_init__(self):
        if self.L_ms <= 0 or not 0 <= self.X < 1:
            raise ValueError("SLA needs L_ms > 0 and 0 <= X < 1")


def sla_check(stats: LatencyStats, scores: ScoreReport, sla: SlaSpec) -> dict[str, bool]:
    p95 = stats.read.p95_us
    return {
        "latency": p95 is not None and p95 <= sla.L_ms * 1000,
        "staleness": scores.proportion_positive_reads <= sla.X,
    }


@dataclass
class RunReport:
    latency: LatencyStats
    score: ScoreReport
    target_ops_s: float | None = None
    sla: SlaSpec | None = None
    sla_verdicts: dict[str, bool] | None = None
    config_digest: str = ""
    seed: int | None = None
    policy: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def throughput_shortfall(self) -> bool:
        if not self.target_ops_s:
            return False
        return self.latency.throughput_ops_s < 0.99 * self.target_ops_s

    def to_json(self) -> dict:
        lat = self.latency
        out = {
            "policy": self.policy,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "ops": lat.ops,
            "duration_s": lat.duration_s,
            "throughput_ops_s": lat.throughput_ops_s,
            "target_ops_s": self.target_ops_s,
            "throughput_shortfall": self.throughput_shortfall,
            "latency": {"read": asdict(lat.read), "write": asdict(lat.write)},
            **self.score.to_json(),
        }
        if self.sla is not None:
            out["sla"] = {"L_ms": self.sla.L_ms, "X": self.sla.X, "verdicts": self.sla_verdicts}
        out.update(self.extra)
        return out
