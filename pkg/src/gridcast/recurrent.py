"""Batch forecasts from recurrent daily fluctuations.

The expected one-step change into time ``t`` is the average of the changes
at the same time of day over the previous ``n_days`` days, keeping only
increments that pass the validity indicator. A forecast ``i`` steps ahead
adds the expected changes for ``t+1 .. t+i`` to the (repaired) current
value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from gridcast.errors import ConfigError, InsufficientHistory
from gridcast.quality import Reason, ValidityStats, point_reasons
from gridcast.timeseries import SeriesWindow


@dataclass(frozen=True)
class RecurrentConfig:
    tau_d: int
    horizon: int = 12
    n_days: int = 7
    filtered: bool = True

    def __post_init__(self):
        if self.n_days < 1:
            raise ConfigError("n_days must be >= 1")
        if self.tau_d < 2:
            raise ConfigError("tau_d must be >= 2")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")


def fluctuation_terms(
    y: np.ndarray,
    ok: np.ndarray,
    targets: np.ndarray,
    origin: int,
    cfg: RecurrentConfig,
    threshold: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Averaged increments for several target times at once.

    ``y`` and ``ok`` are indexed by position (extra trailing axes are
    treated as independent lines). For each target ``t`` the increments
    ``y[t - n*tau_d] - y[t - 1 - n*tau_d]`` for ``n = 1..n_days`` are
    averaged over those whose indicator is 1. Lags after ``origin`` are
    never read. Returns ``(mean, count)`` with ``mean = 0`` where
    ``count = 0``.
    """
    n = np.arange(1, cfg.n_days + 1)
    k = np.asarray(targets)[:, None] - n[None, :] * cfg.tau_d
    if k.min() < 1:
        raise InsufficientHistory(
            f"need {cfg.n_days} days of history before position {int(np.min(targets))}"
        )
    seen = k <= origin
    k = np.minimum(k, origin)
    d = y[k] - y[k - 1]
    use = ok[k] & ok[k - 1]
    if cfg.filtered:
        with np.errstate(invalid="ignore"):
            use &= np.abs(d) <= threshold
    if y.ndim > 1:
        seen = seen.reshape(seen.shape + (1,) * (y.ndim - 1))
    use &= seen
    count = use.sum(axis=1)
    total = np.where(use, d, 0.0).sum(axis=1)
    mean = np.where(count > 0, total / np.maximum(count, 1), 0.0)
    return mean, count


def _causal_arrays(window: SeriesWindow, origin: int, stats: ValidityStats, filtered: bool):
    """Values and point indicators as known at ``origin``."""
    w = window.slice(0, origin + 1)
    reasons = point_reasons(w, stats)
    ok = reasons == Reason.OK if filtered else w.present.copy()
    usable = (reasons == Reason.OK) | (reasons == Reason.ZERO_RUN)
    return w.values, ok, usable


def repair_terminal(values: np.ndarray, usable: np.ndarray, t: int) -> float:
    """Value at ``t`` if well defined, else the last well-defined one, else 0."""
    hits = np.flatnonzero(usable[: t + 1])
    return float(values[hits[-1]]) if hits.size else 0.0


def expected_fluctuation(
    window: SeriesWindow,
    t: int,
    cfg: RecurrentConfig,
    stats: ValidityStats,
    origin: Optional[int] = None,
) -> Tuple[float, int]:
    """Average recurrent change into position ``t`` and the number of valid terms.

    Validity is judged with data up to ``origin`` (default ``t - 1``).
    """
    if t - cfg.n_days * cfg.tau_d < 1:
        raise InsufficientHistory(f"position {t} lacks {cfg.n_days} days of history")
    origin = t - 1 if origin is None else origin
    y, ok, _ = _causal_arrays(window, origin, stats, cfg.filtered)
    mean, count = fluctuation_terms(y, ok, np.array([t]), origin, cfg, stats.increment_threshold)
    return float(mean[0]), int(count[0])


def compose_recurrent_forecast(
    window: SeriesWindow,
    t: int,
    cfg: RecurrentConfig,
    stats: ValidityStats,
    i: Optional[int] = None,
) -> float:
    """Forecast of position ``t + i`` from data up to ``t``."""
    i = cfg.horizon if i is None else i
    if not 0 <= t < len(window):
        raise InsufficientHistory(f"origin {t} outside window")
    if t + 1 - cfg.n_days * cfg.tau_d < 1:
        raise InsufficientHistory(f"origin {t} lacks {cfg.n_days} days of history")
    y, ok, usable = _causal_arrays(window, t, stats, cfg.filtered)
    mean, _ = fluctuation_terms(
        y, ok, t + np.arange(1, i + 1), t, cfg, stats.increment_threshold
    )
    return repair_terminal(y, usable, t) + float(mean.sum())


def fluctuation_profile(
    window: SeriesWindow, lo: int, hi: int, cfg: RecurrentConfig, stats: ValidityStats
) -> Tuple[np.ndarray, np.ndarray]:
    """Expected fluctuations for targets ``lo..hi-1`` and their ``horizon``-step sums.

    Each target is computed with data strictly before it; the composed sum
    at ``t`` is the change expected over ``t+1 .. t+horizon``.
    """
    fluct, composed = [], []
    for t in range(lo, hi):
        fluct.append(expected_fluctuation(window, t, cfg, stats)[0])
        y, ok, _ = _causal_arrays(window, t, stats, cfg.filtered)
        mean, _ = fluctuation_terms(
            y, ok, t + np.arange(1, cfg.horizon + 1), t, cfg, stats.increment_threshold
        )
        composed.append(mean.sum())
    return np.array(fluct), np.array(composed)
