import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nocqos.metrics import latency_stats, mips, service_deficit_jitter, window_bandwidth


def brute_force_jitter(events, rate, start, end):
    """O(n^2) over every pair of cycle boundaries in [start - 1, end - 1]."""
    served = {}
    for c, b in events:
        served[c] = served.get(c, 0) + b
    d = {start - 1: 0.0}
    acc = 0.0
    for t in range(start, end):
        acc += served.get(t, 0)
        d[t] = rate * (t - start + 1) - acc
    arr = np.array([d[t] for t in sorted(d)])
    best = 0.0
    for i in range(len(arr) - 1):   # every (t1, t2 > t1) pair
        best = max(best, float((arr[i + 1:] - arr[i]).max()))
    return best


events_strategy = st.lists(st.tuples(st.integers(0, 199), st.integers(1, 64)), max_size=60)


@given(events_strategy, st.floats(0.0, 8.0), st.integers(1, 200))
def test_jitter_matches_brute_force(events, rate, end):
    events = sorted(e for e in events if e[0] < end)
    fast = service_deficit_jitter(events, rate, 0, end)
    slow = brute_force_jitter(events, rate, 0, end)
    assert fast == pytest.approx(slow, abs=1e-9)


def test_jitter_matches_brute_force_on_a_long_trace():
    import random
    rng = random.Random(7)
    events = sorted((rng.randrange(0, 10_000), rng.choice([8, 16, 64])) for _ in range(1_000))
    assert service_deficit_jitter(events, 1.5, 0, 10_000) == pytest.approx(
        brute_force_jitter(events, 1.5, 0, 10_000))


def test_regular_service_deficit_is_at_most_one_burst():
    burst, period = 64, 64
    events = [(t, burst) for t in range(period - 1, 100_000, period)]
    assert service_deficit_jitter(events, burst / period, 0, 100_000) <= burst


def test_gap_then_catch_up_deficit_is_rate_times_gap():
    # one byte per cycle, except nothing for cycles 100..149 and 50 extra at 150
    events = [(t, 1) for t in range(100)] + [(150, 51)] + [(t, 1) for t in range(151, 300)]
    assert service_deficit_jitter(events, 1.0, 0, 300) == pytest.approx(50.0)


def test_zero_rate_has_no_deficit():
    assert service_deficit_jitter([(3, 10)], 0.0, 0, 10) == 0.0


def test_window_bandwidth_constant_beat():
    events = [(t, 8) for t in range(1000)]
    assert window_bandwidth(events, 0, 1000, 100, 200.0) == [1600.0] * 10


def test_window_bandwidth_idle_initiator():
    assert window_bandwidth([], 0, 1000, 100, 200.0) == [0.0] * 10


@given(st.lists(st.tuples(st.integers(0, 999), st.integers(1, 64)), max_size=100),
       st.integers(1, 400))
def test_windows_sum_to_whole_run(events, window):
    series = window_bandwidth(sorted(events), 0, 1000, window, 200.0)
    total_bytes = 0.0
    for k, bw in enumerate(series):
        length = min(window, 1000 - k * window)
        total_bytes += bw / 200.0 * length
    assert total_bytes == pytest.approx(sum(b for _, b in events))


def test_window_must_be_positive():
    with pytest.raises(ValueError):
        window_bandwidth([], 0, 10, 0, 200.0)


def test_mips_formula():
    # 1000 misses, 16 instructions each, in one millisecond -> 16 MIPS
    assert mips(1000, 16.0, 1e-3) == pytest.approx(16.0)


def test_mips_without_misses_is_zero(caplog):
    assert mips(0, 16.0, 1.0) == 0.0
    assert "no cache misses" in caplog.text


def test_mips_needs_elapsed_time():
    with pytest.raises(ValueError):
        mips(1, 16.0, 0.0)


def test_latency_stats():
    s = latency_stats(list(range(1, 101)))
    assert (s["min"], s["max"], s["mean"]) == (1.0, 100.0, 50.5)
    assert s["p95"] == pytest.approx(95.05)
    assert all(math.isnan(v) for v in latency_stats([]).values())
