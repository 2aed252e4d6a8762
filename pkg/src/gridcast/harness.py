"""Evaluation, stress scenarios, sweeps and 2:1 rank scoring.

Every forecaster evaluated here follows the same streaming protocol::

    f.fit(train_values, stats, flags, line_ids)   # (n_train, n_lines)
    f.update(row)                                 # one grid step, NaN = no value
    f.forecast(horizon) -> ndarray                # one value per line

The harness feeds rows strictly in time order and asks for a forecast only
after the origin row has been fed, so a forecaster never sees a sample
later than the origin of the prediction it is making.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from gridcast.adaptive import AdaptiveForecaster, SmoothingParams
from gridcast.errors import ConfigError, NoEvaluablePoints
from gridcast.quality import ValidityStats, compute_global_rms
from gridcast.recurrent import RecurrentConfig, fluctuation_profile, fluctuation_terms
from gridcast.rng import SplitMix64
from gridcast.timeseries import Flag, SeriesWindow, stack_windows


class PersistenceForecaster:
    """Last observed value, held across gaps (0 before any observation)."""

    name = "persistence"

    def fit(self, values, stats, flags=None, line_ids=None):
        values = np.asarray(values, dtype=np.float64)
        self.last = np.zeros(values.shape[1])
        for row in values:
            self.update(row)
        return self

    def update(self, row) -> None:
        row = np.asarray(row, dtype=np.float64)
        self.last = np.where(np.isfinite(row), row, self.last)

    def forecast(self, horizon: int) -> np.ndarray:
        return self.last.copy()


class RecurrentForecaster:
    """Streaming adapter for the batch recurrent-fluctuation forecast.

    Keeps the full history and maintains point validity incrementally: a
    zero becomes invalid, together with the zeros before it, once its run
    reaches ``zero_run_min``. The result equals two-sided validity computed
    on the history available at the origin. Origins without ``n_days`` of
    history fall back to persistence.
    """

    def __init__(self, cfg: RecurrentConfig, name: Optional[str] = None):
        self.cfg = cfg
        self.name = name or ("recurrent" if cfg.filtered else "recurrent-raw")

    def fit(self, values, stats, flags=None, line_ids=None):
        values = np.asarray(values, dtype=np.float64)
        self.stats = stats
        n_lines = values.shape[1]
        cap = max(64, 2 * values.shape[0])
        self.y = np.full((cap, n_lines), np.nan)
        self.ok = np.zeros((cap, n_lines), dtype=bool)
        self.n = 0
        self.zero_run = np.zeros(n_lines, dtype=np.int64)
        self.last = np.zeros(n_lines)
        for row in values:
            self.update(row)
        return self

    def update(self, row) -> None:
        row = np.asarray(row, dtype=np.float64)
        if self.n == len(self.y):
            self.y = np.concatenate([self.y, np.full_like(self.y, np.nan)])
            self.ok = np.concatenate([self.ok, np.zeros_like(self.ok)])
        k, m = self.n, self.stats.zero_run_min
        finite = np.isfinite(row)
        zero = finite & (row == 0)
        self.zero_run = np.where(zero, self.zero_run + 1, 0)
        with np.errstate(invalid="ignore"):
            usable = finite & ~(np.abs(row) > self.stats.outlier_threshold)
        self.y[k] = row
        if self.cfg.filtered:
            self.ok[k] = usable & (self.zero_run < m)
            hit = self.zero_run == m
            if hit.any():
                self.ok[max(0, k - m + 1):k, hit] = False
        else:
            self.ok[k] = finite
        self.last = np.where(usable, row, self.last)
        self.n += 1

    def forecast(self, horizon: int) -> np.ndarray:
        t = self.n - 1
        if t + 1 - self.cfg.n_days * self.cfg.tau_d < 1:
            return self.last.copy()
        mean, _ = fluctuation_terms(
            self.y[:self.n], self.ok[:self.n], t + np.arange(1, horizon + 1), t,
            self.cfg, self.stats.increment_threshold,
        )
        return self.last + mean.sum(axis=0)


class RecordingForecaster:
    """Wraps a forecaster and logs how many rows it had seen at each forecast."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.rows_seen = 0
        self.seen_at_forecast: List[int] = []

    def fit(self, values, stats, flags=None, line_ids=None):
        self.rows_seen = len(values)
        return self.inner.fit(values, stats, flags, line_ids)

    def update(self, row) -> None:
        self.rows_seen += 1
        self.inner.update(row)

    def forecast(self, horizon: int):
        self.seen_at_forecast.append(self.rows_seen)
        return self.inner.forecast(horizon)


@dataclass
class EvalReport:
    name: str
    per_line_rmse: Dict[str, float]
    aggregate_rmse: float
    elapsed_s: float
    n_predictions: int
    n_skipped: int
    horizon: int = 0
    params: Dict[str, object] = field(default_factory=dict)


def _split_index(n: int, split: float) -> int:
    if isinstance(split, (int, np.integer)) and not isinstance(split, bool) and split >= 1:
        return int(split)
    if not 0.0 <= split < 1.0:
        raise ConfigError(f"split must be a fraction in [0, 1) or a step count, got {split}")
    return int(math.floor(split * n + 1e-9))


def evaluate(
    forecaster,
    lines: Sequence[SeriesWindow],
    horizon: int,
    split: float = 0.5,
    stats: Optional[ValidityStats] = None,
    on_forecast: Optional[Callable[[int, np.ndarray], None]] = None,
) -> EvalReport:
    """Train on the first ``split`` of the aligned lines, then forecast at every
    later origin and score against observed targets ``horizon`` steps ahead.

    ``split`` is a fraction of the span or, if an integer >= 1, a step count.
    Targets that are missing or non-numeric are skipped and counted.
    ``on_forecast(origin_position, forecasts)`` is called after each
    forecast. ``elapsed_s`` covers only the forecaster's own calls.
    """
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    _, values, flags = stack_windows(lines)
    n, n_lines = values.shape
    s = _split_index(n, split)
    if s < 1 or s >= n - horizon + 1:
        raise NoEvaluablePoints(f"no test origins: span {n}, split {s}, horizon {horizon}")
    numeric = np.where(flags == Flag.PRESENT, values, np.nan)
    if stats is None:
        stats = compute_global_rms(
            [SeriesWindow(0, values[:s, j], flags[:s, j]) for j in range(n_lines)]
        )
    line_ids = [w.line_id for w in lines]

    sq = np.zeros(n_lines)
    cnt = np.zeros(n_lines, dtype=np.int64)
    skipped = 0
    elapsed = 0.0
    t0 = time.perf_counter()
    forecaster.fit(numeric[:s], stats, flags[:s], line_ids)
    elapsed += time.perf_counter() - t0
    for t in range(s, n - horizon):
        row = numeric[t]
        t0 = time.perf_counter()
        forecaster.update(row)
        pred = np.asarray(forecaster.forecast(horizon), dtype=np.float64)
        elapsed += time.perf_counter() - t0
        if on_forecast is not None:
            on_forecast(t, pred)
        target = numeric[t + horizon]
        ok = np.isfinite(target)
        err = np.where(ok, target - pred, 0.0)
        sq += err * err
        cnt += ok
        skipped += int((~ok).sum())
    total = int(cnt.sum())
    if total == 0:
        raise NoEvaluablePoints("every target in the test span is missing")
    per_line = {
        lid: (float(np.sqrt(sq[j] / cnt[j])) if cnt[j] else math.nan)
        for j, lid in enumerate(line_ids)
    }
    return EvalReport(
        name=getattr(forecaster, "name", type(forecaster).__name__),
        per_line_rmse=per_line,
        aggregate_rmse=float(np.sqrt(sq.sum() / total)),
        elapsed_s=elapsed,
        n_predictions=total,
        n_skipped=skipped,
        horizon=horizon,
    )


def rmse(predictions, targets) -> float:
    """Plain RMSE over pairs whose target is finite."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    ok = np.isfinite(y)
    if not ok.any():
        raise NoEvaluablePoints("no finite targets")
    return float(np.sqrt(np.mean((y[ok] - p[ok]) ** 2)))


# --- stress scenarios -------------------------------------------------------


class ScenarioKind(str, enum.Enum):
    INJECT_OUTLIERS = "InjectOutliers"
    DROP_POINTS = "DropPoints"
    SHUFFLE_SEGMENTS = "ShuffleSegments"
    RESIZE_GRID = "ResizeGrid"


@dataclass(frozen=True)
class StressScenario:
    kind: ScenarioKind
    intensity: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if not 0.0 <= self.intensity <= 1.0:
            raise ConfigError(f"intensity must lie in [0, 1], got {self.intensity}")


HUGE_FACTOR = 1e6


def _inject_outliers(w: SeriesWindow, frac: float, rng: SplitMix64) -> SeriesWindow:
    n = len(w)
    k = int(math.floor(frac * n + 1e-9))
    values, flags = w.values.copy(), w.flags.copy()
    if k == 0:
        return SeriesWindow(w.start_index, values, flags, w.line_id)
    pos = rng.permutation(n)[:k]
    present = values[w.present]
    scale = float(np.sqrt(np.mean(present ** 2))) if present.size else 1.0
    scale = scale if scale > 0 else 1.0
    signs = np.where(rng.uniform(k) < 0.5, -1.0, 1.0)
    for r, p in enumerate(pos):
        kind = r % 3
        if kind == 0:
            values[p], flags[p] = np.nan, Flag.NONNUMERIC
        elif kind == 1:
            values[p], flags[p] = signs[r] * HUGE_FACTOR * scale, Flag.PRESENT
        else:
            values[p], flags[p] = 0.0, Flag.PRESENT
    return SeriesWindow(w.start_index, values, flags, w.line_id)


def _drop_points(w: SeriesWindow, frac: float, rng: SplitMix64) -> SeriesWindow:
    n = len(w)
    k = int(math.floor(frac * n + 1e-9))
    values, flags = w.values.copy(), w.flags.copy()
    pos = rng.choice(n, k)
    values[pos], flags[pos] = np.nan, Flag.MISSING
    return SeriesWindow(w.start_index, values, flags, w.line_id)


def _shuffle_segments(w: SeriesWindow, frac: float, rng: SplitMix64, block: int) -> SeriesWindow:
    n_blocks = len(w) // block
    k = int(math.floor(frac * n_blocks + 1e-9))
    if frac > 0 and n_blocks >= 2:
        k = max(k, 2)
    values, flags = w.values.copy(), w.flags.copy()
    if k < 2:
        return SeriesWindow(w.start_index, values, flags, w.line_id)
    chosen = rng.choice(n_blocks, k)
    order = chosen[rng.permutation(k)]
    for dst, src in zip(chosen, order):
        values[dst * block:(dst + 1) * block] = w.values[src * block:(src + 1) * block]
        flags[dst * block:(dst + 1) * block] = w.flags[src * block:(src + 1) * block]
    return SeriesWindow(w.start_index, values, flags, w.line_id)


def _resize_grid(lines: List[SeriesWindow], frac: float, rng: SplitMix64) -> List[SeriesWindow]:
    n = len(lines)
    k = int(math.floor(frac * n + 1e-9))
    if frac > 0:
        k = max(k, 1)
    if k == 0:
        return list(lines)
    picked = set(rng.choice(n, min(k, n)).tolist())
    grow = rng.uniform(1)[0] < 0.5 or k >= n
    out = []
    for j, w in enumerate(lines):
        if j in picked and not grow:
            continue
        out.append(w)
        if j in picked and grow:
            out.append(SeriesWindow(w.start_index, w.values.copy(), w.flags.copy(),
                                    f"{w.line_id}~dup"))
    return out


def apply_scenario(
    lines: Sequence[SeriesWindow], scenario: StressScenario, block_len: int = 288
) -> List[SeriesWindow]:
    """Deterministic mutation of ``lines``; inputs are never modified.

    ``InjectOutliers`` replaces a fraction of points with NaN, huge values
    and exact zeros in turn; ``DropPoints`` turns a fraction of points into
    gaps; ``ShuffleSegments`` permutes a fraction of the ``block_len`` blocks
    (at least two); ``ResizeGrid`` removes or duplicates a fraction of the
    lines (at least one).
    """
    rng = SplitMix64(scenario.seed)
    kind, frac = scenario.kind, scenario.intensity
    if kind is ScenarioKind.RESIZE_GRID:
        return _resize_grid(list(lines), frac, rng)
    out = []
    for j, w in enumerate(lines):
        sub = rng.spawn(j)
        if kind is ScenarioKind.INJECT_OUTLIERS:
            out.append(_inject_outliers(w, frac, sub))
        elif kind is ScenarioKind.DROP_POINTS:
            out.append(_drop_points(w, frac, sub))
        else:
            out.append(_shuffle_segments(w, frac, sub, block_len))
    return out


# --- scoring ----------------------------------------------------------------


@dataclass(frozen=True)
class Ranking:
    name: str
    score: int
    accuracy_rank: int
    speed_rank: int
    rmse: float
    elapsed_s: float


def _min_ranks(keys: Sequence[float]) -> List[int]:
    return [1 + sum(1 for other in keys if other < k) for k in keys]


def rank_score(reports: Sequence[EvalReport]) -> List[Ranking]:
    """Competition ranking: twice the accuracy rank plus the speed rank.

    Rank 1 is best and tied entrants share the better rank. Lower scores
    win; equal scores go to the lower RMSE, then to the name.
    """
    if len(reports) < 2:
        raise ConfigError("ranking needs at least two reports")
    acc = _min_ranks([r.aggregate_rmse for r in reports])
    spd = _min_ranks([r.elapsed_s for r in reports])
    rows = [
        Ranking(r.name, 2 * a + s, a, s, r.aggregate_rmse, r.elapsed_s)
        for r, a, s in zip(reports, acc, spd)
    ]
    return sorted(rows, key=lambda x: (x.score, x.rmse, x.name))


# --- sweeps and CSV ---------------------------------------------------------


def sweep(
    grid: Dict[str, Sequence],
    lines: Sequence[SeriesWindow],
    horizon: int = 12,
    split: float = 0.5,
    base: Optional[SmoothingParams] = None,
    stats: Optional[ValidityStats] = None,
) -> List[EvalReport]:
    """Evaluate the adaptive forecaster on the cartesian product of ``grid``.

    Rows follow ``itertools.product`` over the grid keys in insertion order.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ConfigError("sweep grid must be non-empty")
    base = base or SmoothingParams()
    keys = list(grid)
    out = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        overrides = dict(zip(keys, combo))
        params = replace(base, **overrides)
        label = ";".join(f"{k}={v}" for k, v in overrides.items())
        report = evaluate(AdaptiveForecaster(params, f"adaptive[{label}]"), lines, horizon,
                          split, stats)
        report.params = overrides
        out.append(report)
    return out


def reports_to_csv(reports: Sequence[EvalReport], with_timing: bool = True,
                   rankings: Optional[Sequence[Ranking]] = None) -> str:
    """One row per report. Timing columns are optional so that output can be
    made byte-reproducible."""
    param_keys: List[str] = []
    for r in reports:
        for k in r.params:
            if k not in param_keys:
                param_keys.append(k)
    header = ["name", *param_keys, "horizon", "aggregate_rmse", "n_predictions", "n_skipped"]
    if with_timing:
        header += ["elapsed_s", "score", "accuracy_rank", "speed_rank"]
    by_name = {x.name: x for x in rankings or ()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in reports:
        row = [r.name, *(r.params.get(k, "") for k in param_keys), r.horizon,
               repr(r.aggregate_rmse), r.n_predictions, r.n_skipped]
        if with_timing:
            rk = by_name.get(r.name)
            row += [f"{r.elapsed_s:.6f}", rk.score if rk else "",
                    rk.accuracy_rank if rk else "", rk.speed_rank if rk else ""]
        w.writerow(row)
    return buf.getvalue()


def per_line_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "line_id", "rmse"])
    for r in reports:
        for lid in sorted(r.per_line_rmse):
            w.writerow([r.name, lid, repr(r.per_line_rmse[lid])])
    return buf.getvalue()


def figure_rows(
    window: SeriesWindow,
    cfg: RecurrentConfig,
    stats: ValidityStats,
    lo: int,
    hi: int,
) -> List[tuple]:
    """Long-format ``(time_index, series, value)`` rows for the last-day plots.

    Series: ``observed``; raw and filtered expected fluctuations and their
    ``horizon``-step sums; and ``horizon``-ahead forecasts of persistence and
    of the filtered recurrent method, indexed by target time.
    """
    rows = []
    for k in range(lo, hi):
        if window.flags[k] == Flag.PRESENT:
            rows.append((window.start_index + k, "observed", float(window.values[k])))
    for filtered in (False, True):
        c = replace(cfg, filtered=filtered)
        fluct, comp = fluctuation_profile(window, lo, hi, c, stats)
        tag = "filtered" if filtered else "raw"
        for k, (f, s) in enumerate(zip(fluct, comp)):
            rows.append((window.start_index + lo + k, f"fluct_{tag}", float(f)))
            rows.append((window.start_index + lo + k, f"composed_{tag}", float(s)))
    h = cfg.horizon
    for name, fc in (("persistence", PersistenceForecaster()), ("recurrent", RecurrentForecaster(cfg))):
        numeric = window.numeric()
        fc.fit(numeric[:lo, None], stats)
        for k in range(lo, hi - h):
            fc.update(numeric[k:k + 1])
            pred = float(fc.forecast(h)[0])
            rows.append((window.start_index + k + h, f"forecast_{name}", pred))
    return rows


def long_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_index", "series", "value"])
    for idx, series, value in rows:
        w.writerow([idx, series, repr(value)])
    return buf.getvalue()
