import random

import pytest
from conftest import R, W
from hypothesis import given
from hypothesis import strategies as st

from cpqsim.core import Trace
from cpqsim.gamma import analyze
from cpqsim.metrics import LatencyStats, KindStats, RunReport, SlaSpec, percentile, sla_check, summarize


@pytest.mark.parametrize("samples,q,expected", [
    (list(range(1, 101)), 95, 95),
    ([7], 1, 7),
    ([7], 99.9, 7),
    ([1, 2, 3, 4], 50, 2),
    ([4, 3, 2, 1], 100, 4),
])
def test_percentile_examples(samples, q, expected):
    assert percentile(samples, q) == expected


def test_percentile_errors():
    with pytest.raises(ValueError):
        percentile([], 50)
    with pytest.raises(ValueError):
        percentile([1], 0)


@given(st.lists(st.integers(-10**6, 10**6), min_size=1), st.floats(0.01, 100), st.floats(0.01, 100))
def test_percentile_properties(samples, q1, q2):
    assert percentile(samples, 100) == max(samples)
    lo, hi = sorted((q1, q2))
    assert percentile(samples, lo) <= percentile(samples, hi)


def test_summarize_single_op():
    stats = summarize(Trace([R(0, 1, 0, 3000)]))
    assert stats.read.p95_us == 3000 and stats.read.count == 1
    assert stats.write.count == 0 and stats.write.p95_us is None


def test_summarize_empty():
    stats = summarize(Trace([]))
    assert stats.ops == 0 and stats.read.count == 0 and stats.read.p95_us is None
    assert stats.throughput_ops_s == 0.0


def test_summarize_excludes_load_phase():
    trace = Trace([W(0, 1, 0, 99999, op_id=0), R(0, 1, 10, 20, op_id=1)], {"load_ops": "1", "duration_us": "1000000"})
    stats = summarize(trace)
    assert stats.ops == 1 and stats.write.count == 0 and stats.throughput_ops_s == 1.0


def test_summarize_permutation_invariant():
    rng = random.Random(3)
    records = [R(0, 1, t, t + rng.randint(1, 5000)) for t in range(0, 200_000, 1000)]
    records += [W(0, v, t, t + rng.randint(1, 5000)) for v, t in enumerate(range(500, 200_000, 3000), 2)]
    base = summarize(Trace(records))
    for _ in range(5):
        shuffled = records[:]
        rng.shuffle(shuffled)
        assert summarize(Trace(shuffled)) == base


def test_per_host_p95_mode():
    # Client 0 on host 0 is fast, client 1 on host 1 is slow.
    records = [R(0, 1, t, t + 100, client=0) for t in range(0, 100_000, 1000)]
    records += [R(0, 1, t, t + 900, client=1) for t in range(0, 100_000, 1000)]
    trace = Trace(records, {"hosts": "2"})
    assert summarize(trace).read.p95_us == 900
    assert summarize(trace, per_host=True).read.p95_us == 500


def _stats(read_p95_us):
    return LatencyStats(KindStats(count=1, p95_us=read_p95_us), KindStats(), 0.0, 1, 1.0)


def _scores(stale_fraction):
    report = analyze(Trace([]))
    report.proportion_positive_reads = stale_fraction
    return report


@pytest.mark.parametrize("p95_ms,stale,expected", [
    (5, 0.0, {"latency": True, "staleness": True}),
    (9, 0.0, {"latency": False, "staleness": True}),
    (5, 0.02, {"latency": True, "staleness": False}),
])
def test_sla_check(p95_ms, stale, expected):
    assert sla_check(_stats(p95_ms * 1000), _scores(stale), SlaSpec(8, 0.01)) == expected


def test_sla_validation():
    with pytest.raises(ValueError):
        SlaSpec(0, 0.1)
    with pytest.raises(ValueError):
        SlaSpec(5, 1.0)


def test_throughput_shortfall_flag():
    stats = LatencyStats(KindStats(), KindStats(), 980.0, 9800, 10.0)
    assert RunReport(stats, _scores(0), target_ops_s=1000).throughput_shortfall
    stats.throughput_ops_s = 995.0
    assert not RunReport(stats, _scores(0), target_ops_s=1000).throughput_shortfall
