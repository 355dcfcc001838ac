"""Client-centric consistency analysis via per-value Gamma scores.

Operations are clustered by ``(key, value)``.  Each cluster has a *zone*
spanning from its earliest response (``low``) to its latest invocation
(``high``).  A zone is *forward* when ``high > low``: some member finished
before another member started, so the value's effects must cover the whole
zone.  A history with unique writes is linearizable exactly when

* no read finishes before its dictating write starts,
* no two forward zones overlap, and
* no backward zone lies strictly inside a forward zone.

Stretching every operation by ``d/2`` on each side shrinks forward zones and
grows backward ones by ``d/2`` per side, so each violation above disappears
at a definite stretch.  The per-value score of a forward cluster is the
largest such stretch among the violations it takes part in; backward
clusters score zero.  The maximum score over a key's values equals the
minimal stretch making that key's history linearizable, which
:func:`min_stretch_oracle` computes independently by search.
"""

from __future__ import annotations

import bisect
import functools
from collections import defaultdict
from dataclasses import dataclass, field

from .core import ConsistencyLevel, OperationRecord, OpKind, SimTime, Trace

DEFAULT_THRESHOLD_US = 2000
MAX_ORACLE_OPS = 12

# Upper edges (us) of the score histogram buckets; the last bucket is open.
HISTOGRAM_EDGES = (0, 1000, 2000, 5000, 10000, 20000, 50000)


class DanglingValueError(ValueError):
    """A read returned a value that no write in the trace produced."""


class OracleTooLarge(ValueError):
    pass


@dataclass
class Cluster:
    key: int
    value_id: int
    write: OperationRecord | None = None
    reads: list[OperationRecord] = field(default_factory=list)

    @property
    def members(self) -> list[OperationRecord]:
        return ([self.write] if self.write is not None else []) + self.reads


@dataclass(frozen=True, slots=True)
class ClusterZone:
    low: SimTime
    high: SimTime

    @property
    def forward(self) -> bool:
        return self.high > self.low

    @property
    def interval(self) -> tuple[SimTime, SimTime]:
        return (min(self.low, self.high), max(self.low, self.high))


@dataclass
class ScoreReport:
    scores: dict[tuple[int, int], int]
    threshold_us: int
    proportion_positive: float
    proportion_positive_reads: float
    clusters: int
    reads: int
    raw_positive: int

    @property
    def positive(self) -> int:
        return sum(1 for g in self.scores.values() if g > self.threshold_us)

    def histogram(self) -> dict[str, int]:
        return scores_histogram(self.scores.values())

    def to_json(self) -> dict:
        return {
            "scores_histogram": self.histogram(),
            "proportion_positive": self.proportion_positive,
            "proportion_positive_reads": self.proportion_positive_reads,
            "threshold_us": self.threshold_us,
            "clusters": self.clusters,
            "reads": self.reads,
            "positive_clusters": self.positive,
            "raw_positive_clusters": self.raw_positive,
            "max_score_us": max(self.scores.values(), default=0),
        }


def build_clusters(trace: Trace | list[OperationRecord]) -> list[Cluster]:
    clusters: dict[tuple[int, int], Cluster] = {}
    records = trace.records if isinstance(trace, Trace) else trace
    for rec in records:
        pair = (rec.key, rec.value_id)
        cluster = clusters.get(pair)
        if cluster is None:
            cluster = clusters[pair] = Cluster(rec.key, rec.value_id)
        if rec.kind is OpKind.WRITE:
            if cluster.write is not None:
                raise ValueError(f"value {rec.value_id} written twice on key {rec.key}")
            cluster.write = rec
        else:
            cluster.reads.append(rec)
    dangling = [c for c in clusters.values() if c.write is None]
    if dangling:
        c = dangling[0]
        raise DanglingValueError(
            f"{len(dangling)} value(s) read but never written (first: key {c.key} value {c.value_id}); "
            "apply insert_synthetic_initial_writes first"
        )
    return list(clusters.values())


def compute_zone(cluster: Cluster) -> ClusterZone:
    members = cluster.members
    if not members:
        raise ValueError("empty cluster")
    return ClusterZone(
        low=min(op.response for op in members),
        high=max(op.invoke for op in members),
    )


def overlap_length(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def _self_score(cluster: Cluster) -> int:
    # A read that finished before its own write started.
    if cluster.write is None or not cluster.reads:
        return 0
    earliest_finish = min(r.response for r in cluster.reads)
    return max(0, cluster.write.invoke - earliest_finish)


def _pair_score(lo: int, hi: int, other: ClusterZone) -> int:
    """Stretch needed to resolve the conflict between forward zone [lo, hi] and ``other``.

    While ``other`` is forward the two conflict as long as they overlap.
    Once ``other`` is (or has been stretched into) a backward zone it
    conflicts while it sits strictly inside the shrinking forward zone.
    """
    span = other.high - other.low
    overlap = min(hi, other.high) - max(lo, other.low) if span > 0 else 0
    inside = min(other.high - lo, hi - other.low, hi - lo)
    if inside <= max(span, 0):
        inside = 0
    return max(overlap, inside, 0)


def _key_scores(clusters: list[Cluster]) -> list[int]:
    zones = [compute_zone(c) for c in clusters]
    order = sorted(range(len(zones)), key=lambda i: zones[i].interval)
    starts = [zones[i].interval[0] for i in order]
    max_len = max((z.interval[1] - z.interval[0] for z in zones), default=0)

    scores = [0] * len(clusters)
    for i, (cluster, zone) in enumerate(zip(clusters, zones)):
        if not zone.forward:
            continue
        lo, hi = zone.low, zone.high
        best = _self_score(cluster)
        # Only zones starting in [lo - max_len, hi) can intersect [lo, hi].
        first = bisect.bisect_left(starts, lo - max_len)
        last = bisect.bisect_left(starts, hi)
        for j in order[first:last]:
            if j == i:
                continue
            term = _pair_score(lo, hi, zones[j])
            if term > best:
                best = term
        scores[i] = best
    return scores


def per_value_scores(clusters: list[Cluster]) -> dict[tuple[int, int], int]:
    by_key: dict[int, list[Cluster]] = defaultdict(list)
    for c in clusters:
        by_key[c.key].append(c)
    scores = {}
    for key in sorted(by_key):
        group = by_key[key]
        for c, g in zip(group, _key_scores(group)):
            scores[(c.key, c.value_id)] = g
    return scores


def proportion_positive(scores, threshold_us: int = DEFAULT_THRESHOLD_US) -> float:
    values = list(scores.values()) if isinstance(scores, dict) else list(scores)
    if not values:
        return 0.0
    return sum(1 for g in values if g > threshold_us) / len(values)


def scores_histogram(scores) -> dict[str, int]:
    labels = ["0"] + [f"({HISTOGRAM_EDGES[i]},{HISTOGRAM_EDGES[i + 1]}]" for i in range(len(HISTOGRAM_EDGES) - 1)]
    labels.append(f">{HISTOGRAM_EDGES[-1]}")
    counts = dict.fromkeys(labels, 0)
    for g in scores:
        if g <= 0:
            counts["0"] += 1
            continue
        idx = bisect.bisect_left(HISTOGRAM_EDGES, g)
        counts[labels[idx]] += 1
    return counts


def insert_synthetic_initial_writes(trace: Trace) -> Trace:
    """Give every never-written value read in ``trace`` a zero-length write.

    The write is placed 1us before the earliest invocation in the trace, so
    it precedes every real operation.
    """
    written = {(r.key, r.value_id) for r in trace.records if r.is_write}
    missing = sorted({(r.key, r.value_id) for r in trace.records
                      if not r.is_write and (r.key, r.value_id) not in written})
    if not missing:
        return trace
    t0 = min(r.invoke for r in trace.records) - 1
    next_id = max(r.op_id for r in trace.records) + 1
    synthetic = [
        OperationRecord(next_id + i, -1, key, OpKind.WRITE, value, t0, t0, ConsistencyLevel.ONE)
        for i, (key, value) in enumerate(missing)
    ]
    return Trace(synthetic + list(trace.records), dict(trace.metadata))


def analyze(trace: Trace, threshold_us: int = DEFAULT_THRESHOLD_US) -> ScoreReport:
    """Score a trace end to end, inserting synthetic initial writes if needed."""
    clusters = build_clusters(insert_synthetic_initial_writes(trace)) if trace.records else []
    scores = per_value_scores(clusters)
    n_reads = sum(len(c.reads) for c in clusters)
    stale_reads = sum(len(c.reads) for c in clusters if scores[(c.key, c.value_id)] > threshold_us)
    return ScoreReport(
        scores=scores,
        threshold_us=threshold_us,
        proportion_positive=proportion_positive(scores, threshold_us),
        proportion_positive_reads=stale_reads / n_reads if n_reads else 0.0,
        clusters=len(clusters),
        reads=n_reads,
        raw_positive=sum(1 for g in scores.values() if g > 0),
    )


def _linearizable(ops: list[OperationRecord], stretch: int) -> bool:
    """Exhaustive check that ``ops`` linearize once stretched by ``stretch``.

    ``b`` must precede ``a`` when ``b`` finishes strictly before ``a``
    starts after stretching, i.e. ``a.invoke - b.response > stretch``.
    """
    n = len(ops)
    preds = [0] * n
    for a in range(n):
        for b in range(n):
            if a != b and ops[a].invoke - ops[b].response > stretch:
                preds[a] |= 1 << b
    full = (1 << n) - 1
    writes = [op.kind is OpKind.WRITE for op in ops]
    values = [op.value_id for op in ops]

    @functools.lru_cache(maxsize=None)
    def search(placed: int, current) -> bool:
        if placed == full:
            return True
        for i in range(n):
            bit = 1 << i
            if placed & bit or preds[i] & ~placed:
                continue
            if writes[i]:
                if search(placed | bit, values[i]):
                    return True
            elif current == values[i] and search(placed | bit, current):
                return True
        return False

    return search(0, None)


def min_stretch_oracle(ops: list[OperationRecord]) -> int:
    """Smallest uniform stretch under which a single-key history linearizes.

    Brute force, for validation only: the answer is always 0 or one of the
    pairwise gaps ``a.invoke - b.response``, and feasibility is monotone in
    the stretch, so the candidates are binary searched with an exhaustive
    ordering check at each probe.
    """
    if len(ops) > MAX_ORACLE_OPS:
        raise OracleTooLarge(f"{len(ops)} operations exceeds oracle limit of {MAX_ORACLE_OPS}")
    if len({op.key for op in ops}) > 1:
        raise ValueError("oracle expects operations on a single key")
    written = [op.value_id for op in ops if op.is_write]
    if len(written) != len(set(written)):
        raise ValueError("oracle expects unique write values")
    candidates = sorted({0} | {a.invoke - b.response for a in ops for b in ops if a.invoke - b.response > 0})
    if not _linearizable(ops, candidates[-1]):
        # Some read returns a value that is never written.
        raise ValueError("history cannot be linearized at any stretch")
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _linearizable(ops, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return candidates[lo]


def key_gamma(ops: list[OperationRecord]) -> int:
    """Max per-value score over one key's operations."""
    scores = per_value_scores(build_clusters(ops))
    return max(scores.values(), default=0)
