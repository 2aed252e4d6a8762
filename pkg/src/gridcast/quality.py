"""Validity indicators for points and increments.

Two indicators gate every moving average in the package:

* point validity: the sample is present, numeric, not part of a run of
  exact zeros, and not a gross outlier;
* increment validity: both endpoints are valid points, the lag is the one
  expected, and the change does not exceed a multiple of the global RMS.

The increment indicator is strictly stronger than the point indicator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from gridcast.errors import ConfigError, NoData
from gridcast.timeseries import Flag, SeriesWindow


class Reason(enum.IntEnum):
    OK = 0
    MISSING = 1
    NONNUMERIC = 2
    ZERO_RUN = 3
    OUTLIER = 4


@dataclass(frozen=True)
class ValidityStats:
    """Global statistics backing the validity indicators.

    ``global_rms`` is fixed after the training pass. Increments larger than
    ``increment_threshold_factor * global_rms`` and points larger in
    magnitude than ``outlier_factor * global_rms`` are rejected.
    """

    global_rms: float
    increment_threshold_factor: float = 2.0
    zero_run_min: int = 2
    outlier_factor: float = 10.0

    def __post_init__(self):
        if not self.global_rms >= 0:
            raise ConfigError(f"global_rms must be >= 0, got {self.global_rms}")
        if not self.increment_threshold_factor > 0:
            raise ConfigError("increment_threshold_factor must be > 0")
        if self.zero_run_min < 2:
            raise ConfigError("zero_run_min must be >= 2")
        if not self.outlier_factor > 0:
            raise ConfigError("outlier_factor must be > 0")

    @property
    def increment_threshold(self) -> float:
        return self.increment_threshold_factor * self.global_rms

    @property
    def outlier_threshold(self) -> float:
        return self.outlier_factor * self.global_rms


@dataclass(frozen=True)
class ValidityVerdict:
    point_valid: bool
    reason: Reason


def rms_of(values: np.ndarray) -> tuple:
    """Return ``(sum of squares, count)`` over the finite entries."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    return float(np.dot(v, v)), int(v.size)


def compute_global_rms(windows: Iterable[SeriesWindow], **factors) -> ValidityStats:
    """Pooled RMS of every present numeric sample across all windows."""
    total, count = 0.0, 0
    for w in windows:
        s, n = rms_of(w.values[w.present])
        total += s
        count += n
    if count == 0:
        raise NoData("no present numeric samples to compute the global RMS")
    return ValidityStats(float(np.sqrt(total / count)), **factors)


def zero_run_mask(values: np.ndarray, present: np.ndarray, min_len: int) -> np.ndarray:
    """Mark samples inside runs of at least ``min_len`` consecutive exact zeros."""
    z = present & (values == 0)
    out = np.zeros(z.shape, dtype=bool)
    if not z.any():
        return out
    edges = np.diff(np.concatenate(([0], z.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    for a, b in zip(starts, stops):
        if b - a >= min_len:
            out[a:b] = True
    return out


def point_reasons(window: SeriesWindow, stats: ValidityStats) -> np.ndarray:
    """Reason code for every sample of ``window`` (vectorized point validity)."""
    values, flags = window.values, window.flags
    present = flags == Flag.PRESENT
    reasons = np.full(len(window), Reason.OK, dtype=np.uint8)
    with np.errstate(invalid="ignore"):
        outlier = present & (np.abs(values) > stats.outlier_threshold)
    reasons[outlier] = Reason.OUTLIER
    reasons[zero_run_mask(values, present, stats.zero_run_min)] = Reason.ZERO_RUN
    reasons[flags == Flag.NONNUMERIC] = Reason.NONNUMERIC
    reasons[flags == Flag.MISSING] = Reason.MISSING
    return reasons


def point_validity(window: SeriesWindow, k: int, stats: ValidityStats) -> ValidityVerdict:
    if not 0 <= k < len(window):
        raise IndexError(f"position {k} outside window of length {len(window)}")
    # Only the neighbourhood that can influence a zero run is scanned.
    reach = stats.zero_run_min - 1
    lo, hi = max(0, k - reach), min(len(window), k + reach + 1)
    reason = Reason(int(point_reasons(window.slice(lo, hi), stats)[k - lo]))
    return ValidityVerdict(reason is Reason.OK, reason)


def increment_validity(
    window: SeriesWindow,
    k: int,
    k_prev: int,
    stats: ValidityStats,
    expected_lag: int = 1,
) -> bool:
    """Indicator for the increment ``y[k] - y[k_prev]``."""
    if k <= k_prev:
        raise ValueError("increment_validity needs k > k_prev")
    if k - k_prev != expected_lag:
        return False
    if not (point_validity(window, k, stats).point_valid
            and point_validity(window, k_prev, stats).point_valid):
        return False
    return bool(abs(window.values[k] - window.values[k_prev]) <= stats.increment_threshold)


def increment_mask(
    values: np.ndarray, valid: np.ndarray, lag: int, stats: ValidityStats
) -> np.ndarray:
    """Vectorized increment indicator along axis 0.

    ``out[k]`` is the indicator for ``values[k] - values[k - lag]``; the
    first ``lag`` entries are False.
    """
    out = np.zeros(valid.shape, dtype=bool)
    if lag >= len(values):
        return out
    with np.errstate(invalid="ignore"):
        small = np.abs(values[lag:] - values[:-lag]) <= stats.increment_threshold
    out[lag:] = valid[lag:] & valid[:-lag] & small
    return out


class StreamingValidator:
    """Causal point validity for lines updated in lockstep.

    A streaming engine cannot see the sample after ``t``, so a zero is
    flagged once the run it belongs to has reached ``zero_run_min`` samples
    (the first zero of a run is accepted). All other rules match
    :func:`point_reasons`.
    """

    def __init__(self, stats: ValidityStats, n_lines: int):
        self.stats = stats
        self.zero_run = np.zeros(n_lines, dtype=np.int64)

    def step(self, x: np.ndarray) -> tuple:
        """Return ``(valid, usable)`` for one row of raw values.

        ``usable`` marks values that are well defined as terminal values:
        present, numeric and not outliers. Zeros inside runs are usable but
        not valid.
        """
        finite = np.isfinite(x)
        is_zero = finite & (x == 0)
        self.zero_run = np.where(is_zero, self.zero_run + 1, 0)
        with np.errstate(invalid="ignore"):
            usable = finite & ~(np.abs(x) > self.stats.outlier_threshold)
        valid = usable & (self.zero_run < self.stats.zero_run_min)
        return valid, usable

    def reset(self, lines: np.ndarray) -> None:
        self.zero_run[lines] = 0


def validity_matrix(values: np.ndarray, flags: np.ndarray, stats: ValidityStats) -> np.ndarray:
    """Two-sided point validity for an ``(n_steps, n_lines)`` block."""
    out = np.empty(values.shape, dtype=bool)
    for j in range(values.shape[1]):
        w = SeriesWindow(0, values[:, j], flags[:, j])
        out[:, j] = point_reasons(w, stats) == Reason.OK
    return out


def summarize(reasons: Sequence[int]) -> dict:
    """Count of samples per reason, keyed by reason name."""
    counts = np.bincount(np.asarray(reasons, dtype=np.int64), minlength=len(Reason))
    return {r.name: int(counts[r]) for r in Reason}
