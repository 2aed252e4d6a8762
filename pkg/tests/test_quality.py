import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridcast.errors import ConfigError, NoData
from gridcast.quality import (
    Reason,
    StreamingValidator,
    ValidityStats,
    compute_global_rms,
    increment_mask,
    increment_validity,
    point_reasons,
    point_validity,
    summarize,
)
from gridcast.timeseries import Flag, SeriesWindow


def win(values):
    return SeriesWindow.from_array(np.asarray(values, dtype=float))


def test_global_rms_examples():
    assert compute_global_rms([win([3.0, -4.0])]).global_rms == pytest.approx(math.sqrt(12.5))
    assert compute_global_rms([win([0.0, 0.0])]).global_rms == 0.0
    pooled = compute_global_rms([win([1, 1, 1]), win([-1, np.nan, -1])])
    assert pooled.global_rms == 1.0


def test_global_rms_ignores_nonnumeric():
    assert compute_global_rms([win([2.0, np.inf, -2.0])]).global_rms == 2.0


def test_global_rms_brute_force():
    rng = np.random.default_rng(3)
    wins, pooled = [], []
    for _ in range(4):
        v = rng.normal(size=25)
        v[rng.random(25) < 0.2] = np.nan
        wins.append(win(v))
        pooled += [x for x in v if not np.isnan(x)]
    expected = math.sqrt(sum(x * x for x in pooled) / len(pooled))
    assert compute_global_rms(wins).global_rms == pytest.approx(expected, rel=1e-14)


def test_global_rms_no_data():
    with pytest.raises(NoData):
        compute_global_rms([win([np.nan, np.nan])])


def test_stats_validation():
    with pytest.raises(ConfigError):
        ValidityStats(-1.0)
    with pytest.raises(ConfigError):
        ValidityStats(1.0, zero_run_min=1)
    with pytest.raises(ConfigError):
        ValidityStats(1.0, increment_threshold_factor=0.0)


def test_point_validity_reasons():
    stats = ValidityStats(1.0)
    w = SeriesWindow(0, [1.0, np.nan, np.nan, 0.0, 0.0, 2.0, 0.0, 3.0, 50.0],
                     [0, 1, 2, 0, 0, 0, 0, 0, 0])
    got = [point_validity(w, k, stats).reason for k in range(len(w))]
    assert got == [Reason.OK, Reason.MISSING, Reason.NONNUMERIC, Reason.ZERO_RUN,
                   Reason.ZERO_RUN, Reason.OK, Reason.OK, Reason.OK, Reason.OUTLIER]
    for k in range(len(w)):
        v = point_validity(w, k, stats)
        assert v.point_valid == (v.reason is Reason.OK)


def zero_run_oracle(values, min_len):
    """Scan run lengths of exact zeros by hand."""
    out = [False] * len(values)
    k = 0
    while k < len(values):
        if values[k] == 0:
            j = k
            while j < len(values) and values[j] == 0:
                j += 1
            if j - k >= min_len:
                for q in range(k, j):
                    out[q] = True
            k = j
        else:
            k += 1
    return out


@given(st.lists(st.sampled_from([0.0, 1.0, -2.0]), min_size=1, max_size=30), st.integers(2, 4))
def test_zero_run_matches_oracle(values, min_len):
    stats = ValidityStats(10.0, zero_run_min=min_len)
    reasons = point_reasons(win(values), stats)
    assert [r == Reason.ZERO_RUN for r in reasons] == zero_run_oracle(values, min_len)


def test_point_validity_matches_vectorized():
    rng = np.random.default_rng(0)
    v = rng.choice([0.0, 1.0, 5.0, np.nan, 40.0], size=60)
    w = win(v)
    stats = ValidityStats(3.0)
    vec = point_reasons(w, stats)
    assert [point_validity(w, k, stats).reason for k in range(len(w))] == list(vec)


def test_increment_examples():
    stats = ValidityStats(10.0, increment_threshold_factor=2.0)
    assert increment_validity(win([5.0, 5.1]), 1, 0, stats)
    assert not increment_validity(win([1.0, 25.0]), 1, 0, stats)
    assert not increment_validity(win([np.nan, 1.0]), 1, 0, stats)
    assert not increment_validity(win([1.0, np.nan]), 1, 0, stats)


def test_increment_zero_to_25():
    # |0 - 25| = 25 > 2 * 10; the lone zero itself is a valid point
    stats = ValidityStats(10.0)
    w = win([3.0, 0.0, 25.0])
    assert point_validity(w, 1, stats).point_valid
    assert not increment_validity(w, 2, 1, stats)


def test_increment_threshold_inclusive():
    stats = ValidityStats(1.0, increment_threshold_factor=2.0)
    assert increment_validity(win([1.0, 3.0]), 1, 0, stats)
    assert not increment_validity(win([1.0, np.nextafter(3.0, 4.0)]), 1, 0, stats)


def test_increment_wrong_lag_is_a_gap():
    stats = ValidityStats(10.0)
    w = win([1.0, np.nan, 1.5])
    assert not increment_validity(w, 2, 0, stats)
    assert increment_validity(w, 2, 0, stats, expected_lag=2)
    with pytest.raises(ValueError):
        increment_validity(w, 0, 0, stats)


values_st = st.lists(
    st.one_of(st.sampled_from([0.0, np.nan]), st.floats(-100, 100, allow_nan=False)),
    min_size=2, max_size=25,
)


@given(values_st, st.floats(0.1, 50))
def test_strictness(values, rms):
    stats = ValidityStats(rms)
    w = win(values)
    for k in range(1, len(w)):
        if increment_validity(w, k, k - 1, stats):
            assert point_validity(w, k, stats).point_valid
            assert point_validity(w, k - 1, stats).point_valid


@settings(max_examples=60)
@given(values_st, st.integers(-6, 6))
def test_scale_covariance(values, power):
    c = 2.0 ** power  # exact scaling keeps comparisons bit-stable
    base = [win(values)]
    scaled = [win(np.asarray(values) * c)]
    try:
        s0 = compute_global_rms(base)
    except NoData:
        return
    s1 = compute_global_rms(scaled)
    assert s1.global_rms == pytest.approx(c * s0.global_rms, rel=1e-12)
    for k in range(1, len(values)):
        assert increment_validity(base[0], k, k - 1, s0) == increment_validity(scaled[0], k, k - 1, s1)


def test_verdicts_independent_of_evaluation_order():
    rng = np.random.default_rng(5)
    w = win(rng.choice([0.0, 0.0, 1.0, 2.0, np.nan], size=40))
    stats = ValidityStats(1.5)
    forward = [point_validity(w, k, stats) for k in range(len(w))]
    backward = [point_validity(w, k, stats) for k in reversed(range(len(w)))][::-1]
    assert forward == backward


def test_increment_mask_matches_scalar():
    rng = np.random.default_rng(9)
    v = rng.normal(scale=3, size=50)
    v[rng.random(50) < 0.1] = np.nan
    w = win(v)
    stats = ValidityStats(1.0)
    valid = point_reasons(w, stats) == Reason.OK
    mask = increment_mask(v, valid, 1, stats)
    assert not mask[0]
    for k in range(1, 50):
        assert mask[k] == increment_validity(w, k, k - 1, stats)


def test_streaming_validator_is_causal_on_zero_runs():
    stats = ValidityStats(1.0, zero_run_min=2)
    sv = StreamingValidator(stats, 1)
    out = [bool(sv.step(np.array([x]))[0][0]) for x in [1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 3.0]]
    assert out == [True, True, False, False, True, True, True]


def test_streaming_validator_usable_keeps_zero_runs():
    stats = ValidityStats(1.0)
    sv = StreamingValidator(stats, 3)
    sv.step(np.array([0.0, 1.0, 1.0]))
    valid, usable = sv.step(np.array([0.0, np.nan, 100.0]))
    assert list(valid) == [False, False, False]
    assert list(usable) == [True, False, False]


def test_summarize_counts():
    stats = ValidityStats(1.0)
    w = SeriesWindow(0, [1.0, np.nan, 0.0, 0.0], [Flag.PRESENT, Flag.MISSING, 0, 0])
    counts = summarize(point_reasons(w, stats))
    assert counts == {"OK": 1, "MISSING": 1, "NONNUMERIC": 0, "ZERO_RUN": 2, "OUTLIER": 0}
