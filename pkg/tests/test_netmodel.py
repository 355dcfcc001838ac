import statistics
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from cpqsim.core import RngStream
from cpqsim.netmodel import Constant, Empirical, LatencyModel, LogNormal, default_network, sample_delay


def test_constant():
    rng = RngStream(1, "t")
    assert {sample_delay(Constant(200), rng) for _ in range(100)} == {200}


def test_lognormal_median():
    rng = RngStream(1, "t")
    samples = [sample_delay(LogNormal(175, 0.15), rng) for _ in range(100_000)]
    assert abs(statistics.median(samples) - 175) <= 5
    assert min(samples) > 0


def test_default_ping_rtt_band():
    net = default_network()
    rng = RngStream(3, "ping")
    rtts = np.array([net.one_way.sample(rng) + net.one_way.sample(rng) for _ in range(100_000)])
    assert np.mean((rtts >= 300) & (rtts <= 450)) >= 0.80


def test_empirical_reproduces_input_distribution():
    support = (100, 200, 200, 300, 300, 300)
    rng = RngStream(5, "emp")
    counts = Counter(sample_delay(Empirical(support), rng) for _ in range(100_000))
    expected = np.array([1, 2, 3]) / 6 * 100_000
    observed = np.array([counts[100], counts[200], counts[300]])
    assert stats.chisquare(observed, expected).pvalue > 0.001


def test_same_stream_position_same_sample():
    model = LogNormal(600, 1.3)
    assert [model.sample(RngStream(9, "s")) for _ in range(3)] == [model.sample(RngStream(9, "s"))] * 3


def test_parse_and_format():
    for text in ("const:50", "lognormal:175:0.15", "empirical:1,2,3"):
        assert str(LatencyModel.parse(text)) == text
    for bad in ("gamma:1", "const:x", "const:0", "lognormal:1"):
        with pytest.raises(ValueError):
            LatencyModel.parse(bad)


def test_reads_slower_than_writes_by_default():
    svc = default_network().service
    assert svc.read.median_us > svc.write.median_us
