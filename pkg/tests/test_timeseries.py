import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridcast.errors import EmptyInput, InvalidTimestamp
from gridcast.timeseries import (
    Flag,
    SeriesWindow,
    TimeGrid,
    densify,
    normalize_timestamp,
    stack_windows,
)


@pytest.mark.parametrize("raw,expected", [(301, 1), (0, 0), (899, 2), (300, 1)])
def test_normalize_timestamp_truncates(raw, expected):
    assert normalize_timestamp(raw, TimeGrid(0, 300)) == expected


def test_normalize_before_origin_raises():
    with pytest.raises(InvalidTimestamp):
        normalize_timestamp(99, TimeGrid(100, 300))


def test_normalize_with_offset_origin():
    grid = TimeGrid(1_000, 900)
    assert normalize_timestamp(1_000, grid) == 0
    assert normalize_timestamp(1_899, grid) == 0
    assert normalize_timestamp(1_900, grid) == 1


def test_grid_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        TimeGrid(0, 0)


@given(st.integers(0, 10**9), st.integers(0, 10**9))
def test_index_monotone(a, b):
    grid = TimeGrid(0, 300)
    lo, hi = sorted((a, b))
    assert grid.index(lo) <= grid.index(hi)


def test_densify_gap_becomes_missing():
    w = densify([(0, 5.0), (600, 7.0)], TimeGrid(0, 300))
    assert len(w) == 3
    assert w[0].value == 5.0 and w[0].flag is Flag.PRESENT
    assert w[1].value is None and w[1].flag is Flag.MISSING
    assert w[2].value == 7.0


def test_densify_single_point():
    w = densify([(0, 5.0)], TimeGrid(0, 300))
    assert len(w) == 1 and w[0].value == 5.0


def test_densify_same_cell_last_wins():
    w = densify([(0, 1.0), (299, 2.0)], TimeGrid(0, 300))
    assert len(w) == 1 and w[0].value == 2.0


def test_densify_last_wins_by_input_order_not_time():
    # the later timestamp arrives first; input order decides
    w = densify([(299, 2.0), (0, 1.0)], TimeGrid(0, 300))
    assert w[0].value == 1.0


def test_densify_empty_raises():
    with pytest.raises(EmptyInput):
        densify([], TimeGrid())


def test_densify_keeps_nonnumeric_distinct():
    w = densify([(0, 1.0), (300, math.nan), (600, math.inf), (900, None)], TimeGrid(0, 300))
    assert [s.flag for s in w] == [Flag.PRESENT, Flag.NONNUMERIC, Flag.NONNUMERIC, Flag.MISSING]
    assert math.isinf(w[2].value)


def test_window_indices_are_consecutive():
    w = densify([(3000, 1.0), (900, 2.0)], TimeGrid(0, 300))
    assert w.start_index == 3
    assert [s.index for s in w] == list(range(3, 11))


points = st.lists(
    st.tuples(
        st.integers(0, 20_000),
        st.one_of(st.none(), st.floats(allow_nan=True, allow_infinity=True)),
    ),
    min_size=1,
    max_size=40,
)


@given(points)
def test_densify_length_is_index_span(pts):
    grid = TimeGrid(0, 300)
    w = densify(pts, grid)
    idx = [grid.index(t) for t, _ in pts]
    assert len(w) == max(idx) - min(idx) + 1


@given(points)
def test_densify_idempotent(pts):
    grid = TimeGrid(0, 300)
    w = densify(pts, grid)
    again = densify(w.to_points(grid), grid)
    assert again == w


def test_stack_windows_aligns_on_common_span():
    a = SeriesWindow(2, [1.0, 2.0])
    b = SeriesWindow(3, [5.0, 6.0, 7.0])
    lo, values, flags = stack_windows([a, b])
    assert lo == 2 and values.shape == (4, 2)
    assert np.isnan(values[0, 1]) and flags[0, 1] == Flag.MISSING
    assert values[1, 1] == 5.0 and flags[3, 0] == Flag.MISSING


def test_slice_and_numeric():
    w = SeriesWindow.from_array([1.0, np.nan, np.inf, 4.0], start_index=10)
    s = w.slice(1, 3)
    assert s.start_index == 11 and len(s) == 2
    num = w.numeric()
    assert num[0] == 1.0 and np.isnan(num[1]) and np.isnan(num[2])
