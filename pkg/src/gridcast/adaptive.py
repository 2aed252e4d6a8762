"""Streaming forecaster built on exponentially smoothed recurrent fluctuations.

All lines of a grid advance in lockstep and every quantity is a NumPy array
with one entry per line, so a single update costs a fixed number of vector
operations regardless of how many lines there are. Ring buffers are laid
out as ``(slot, line)``; the slot of time ``t`` in a ring of length ``n`` is
``t % n``.

Per step ``t`` the engine maintains:

* ``D`` / ``W``: smoothed one-step change at the same time of day / week,
  updated only when the increment into ``t`` is valid;
* ``gC / gV``: running least-squares estimate of the weekly share ``g`` of
  the recurrent change, fitted on ``monitor_lag``-step-ahead errors;
* ``eM`` / ``eP``: moving squared errors of the model and of persistence,
  used to gate the model off while it underperforms;
* ``m`` and ``oC / oV``: moving average and the fitted pull towards it.

A forecast composes the smoothed changes over the horizon, applies the
gate and the pull, and squashes the total change with
``d -> d / (1 + |d| / K_s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from gridcast.errors import ConfigError
from gridcast.quality import StreamingValidator, ValidityStats, validity_matrix
from gridcast.timeseries import Flag


@dataclass(frozen=True)
class SmoothingParams:
    """Smoothing rates and lags of the streaming engine.

    ``k_s=None`` derives the saturation scale per line from training data:
    the ``k_s_quantile`` of ``|y[t+horizon] - y[t]|`` over valid pairs,
    falling back to ``k_s_rms_factor * global_rms`` when fewer than
    ``k_s_min_pairs`` pairs exist. ``correction`` selects the regressor of
    the mean-reversion fit: ``"origin"`` pairs each monitored error with the
    deviation ``m - y`` at the origin of that forecast, ``"current"`` with
    the deviation at the time the error is observed.
    """

    r_d: float = 0.15
    r_w: float = 0.15
    r_g: float = 0.02
    r_e: float = 0.02
    r_m: float = 0.01
    r_o: float = 0.02
    horizon: int = 12
    monitor_lag: int = 11
    tau_d: int = 288
    tau_w: Optional[int] = None
    k_s: Optional[float] = None
    k_s_quantile: float = 0.995
    k_s_rms_factor: float = 4.0
    k_s_min_pairs: int = 100
    eps: float = 1e-12
    correction: str = "origin"

    def __post_init__(self):
        if self.tau_w is None:
            object.__setattr__(self, "tau_w", 7 * self.tau_d)
        for name in ("r_d", "r_w", "r_g", "r_e", "r_m", "r_o"):
            r = getattr(self, name)
            if not 0.0 < r <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1], got {r}")
        if not 1 <= self.monitor_lag <= self.horizon:
            raise ConfigError("need 1 <= monitor_lag <= horizon")
        if self.tau_d < 2 or self.tau_w < self.tau_d:
            raise ConfigError("need tau_d >= 2 and tau_w >= tau_d")
        if self.k_s is not None and not self.k_s > 0:
            raise ConfigError("k_s must be positive")
        if not 0.0 < self.k_s_quantile <= 1.0:
            raise ConfigError("k_s_quantile must lie in (0, 1]")
        if self.correction not in ("origin", "current"):
            raise ConfigError(f"unknown correction mode {self.correction!r}")


PARAM_KEYS = tuple(f.name for f in fields(SmoothingParams))

# Per-line vectors and rings persisted by snapshots, in file order.
STATE_ARRAYS = (
    "D", "W", "y_hist", "v_hist", "m_hist", "pred1", "sD_hist", "sW_hist",
    "gC", "gV", "oC", "oV", "eM", "eP", "m", "m_init", "g", "o",
    "y_now", "last_valid", "has_last", "zero_run", "steps_seen",
    "fault", "recovered", "recoveries", "k_s",
)


@dataclass(eq=False)
class AdaptiveState:
    params: SmoothingParams
    stats: ValidityStats
    t: int
    D: np.ndarray
    W: np.ndarray
    y_hist: np.ndarray
    v_hist: np.ndarray
    m_hist: np.ndarray
    pred1: np.ndarray
    sD_hist: np.ndarray
    sW_hist: np.ndarray
    gC: np.ndarray
    gV: np.ndarray
    oC: np.ndarray
    oV: np.ndarray
    eM: np.ndarray
    eP: np.ndarray
    m: np.ndarray
    m_init: np.ndarray
    g: np.ndarray
    o: np.ndarray
    y_now: np.ndarray
    last_valid: np.ndarray
    has_last: np.ndarray
    zero_run: np.ndarray
    steps_seen: np.ndarray
    fault: np.ndarray
    recovered: np.ndarray
    recoveries: np.ndarray
    k_s: np.ndarray
    line_ids: list = field(default_factory=list)

    @property
    def n_lines(self) -> int:
        return self.gC.shape[0]

    def nbytes(self) -> int:
        return sum(getattr(self, name).nbytes for name in STATE_ARRAYS)

    def copy(self) -> "AdaptiveState":
        arrays = {name: getattr(self, name).copy() for name in STATE_ARRAYS}
        return AdaptiveState(self.params, self.stats, self.t, line_ids=list(self.line_ids), **arrays)

    def equals(self, other: "AdaptiveState") -> bool:
        """Bitwise equality of every array and scalar."""
        if (self.params != other.params or self.stats != other.stats
                or self.t != other.t or self.line_ids != other.line_ids):
            return False
        for name in STATE_ARRAYS:
            a, b = getattr(self, name), getattr(other, name)
            if a.dtype != b.dtype or a.shape != b.shape or a.tobytes() != b.tobytes():
                return False
        return True


def _fresh_arrays(params: SmoothingParams, n: int) -> dict:
    lag = params.monitor_lag
    zeros = lambda *shape: np.zeros(shape, dtype=np.float64)  # noqa: E731
    return {
        "D": zeros(params.tau_d, n),
        "W": zeros(params.tau_w, n),
        "y_hist": zeros(lag + 1, n),
        "v_hist": np.zeros((lag + 1, n), dtype=bool),
        "m_hist": zeros(lag + 1, n),
        "pred1": zeros(lag, n),
        "sD_hist": zeros(lag, n),
        "sW_hist": zeros(lag, n),
        "gC": zeros(n), "gV": zeros(n), "oC": zeros(n), "oV": zeros(n),
        "eM": zeros(n), "eP": zeros(n), "m": zeros(n),
        "m_init": np.zeros(n, dtype=bool),
        "g": zeros(n), "o": zeros(n),
        "steps_seen": np.zeros(n, dtype=np.int64),
        "fault": np.zeros(n, dtype=bool),
    }


def init_state(
    params: Optional[SmoothingParams] = None,
    n_lines: int = 1,
    stats: Optional[ValidityStats] = None,
    k_s=None,
    line_ids=None,
) -> AdaptiveState:
    """Zeroed state for ``n_lines`` lines.

    Without ``stats`` every increment passes the magnitude test (infinite
    RMS) until a training pass supplies real statistics.
    """
    params = params or SmoothingParams()
    if n_lines < 1:
        raise ConfigError("n_lines must be >= 1")
    stats = stats or ValidityStats(math.inf)
    if k_s is None:
        k_s = params.k_s if params.k_s is not None else _fallback_k_s(params, stats)
    arrays = _fresh_arrays(params, n_lines)
    arrays.update(
        y_now=np.zeros(n_lines),
        last_valid=np.zeros(n_lines),
        has_last=np.zeros(n_lines, dtype=bool),
        zero_run=np.zeros(n_lines, dtype=np.int64),
        recovered=np.zeros(n_lines, dtype=bool),
        recoveries=np.zeros(n_lines, dtype=np.int64),
        k_s=np.broadcast_to(np.asarray(k_s, dtype=np.float64), (n_lines,)).copy(),
    )
    if line_ids is None:
        line_ids = [f"line-{k:04d}" for k in range(n_lines)]
    return AdaptiveState(params, stats, 0, line_ids=list(line_ids), **arrays)


def _fallback_k_s(params: SmoothingParams, stats: ValidityStats) -> float:
    k = params.k_s_rms_factor * stats.global_rms
    return k if k > 0 else math.inf


def saturation_scale(values: np.ndarray, flags: np.ndarray, params: SmoothingParams,
                     stats: ValidityStats) -> np.ndarray:
    """Per-line ``K_s`` from an ``(n_steps, n_lines)`` training block."""
    if params.k_s is not None:
        return np.full(values.shape[1], params.k_s)
    fallback = _fallback_k_s(params, stats)
    h = params.horizon
    out = np.full(values.shape[1], fallback)
    if values.shape[0] <= h:
        return out
    valid = validity_matrix(values, flags, stats)
    both = valid[h:] & valid[:-h]
    change = np.abs(values[h:] - values[:-h])
    for j in range(values.shape[1]):
        pairs = change[both[:, j], j]
        if pairs.size >= params.k_s_min_pairs:
            q = float(np.quantile(pairs, params.k_s_quantile))
            if q > 0:
                out[j] = q
    return out


def _ring_sum(ring: np.ndarray, start: int, count: int) -> np.ndarray:
    """Sum of ``count`` consecutive slots from ``start``, wrapping cyclically."""
    n = ring.shape[0]
    start %= n
    if start + count <= n:
        return ring[start:start + count].sum(axis=0)
    head = ring[start:].sum(axis=0)
    full, rem = divmod(count - (n - start), n)
    total = head + ring[:rem].sum(axis=0)
    if full:
        total = total + full * ring.sum(axis=0)
    return total


def repair_terminal_value(state: AdaptiveState, x: np.ndarray, usable: np.ndarray) -> np.ndarray:
    """Value used as ``y_t``: the sample if well defined, else the last
    well-defined one, else 0. Updates the held value."""
    held = np.where(state.has_last, state.last_valid, 0.0)
    y = np.where(usable, x, held)
    state.last_valid = np.where(usable, x, state.last_valid)
    state.has_last = state.has_last | usable
    return y


def recover(state: AdaptiveState, lines=None) -> AdaptiveState:
    """Reset moving averages and rings of ``lines`` (all by default).

    The held terminal value and the zero-run context survive. A recovered
    line forecasts persistence for a full week of updates (``tau_w``)
    rather than the cold-start day, since both rings restart empty.
    """
    sel = slice(None) if lines is None else np.asarray(lines)
    fresh = _fresh_arrays(state.params, state.n_lines)
    for name, arr in fresh.items():
        target = getattr(state, name)
        if target.ndim == 2:
            target[:, sel] = arr[:, sel]
        else:
            target[sel] = arr[sel]
    state.recovered[sel] = True
    return state


def update(state: AdaptiveState, x) -> AdaptiveState:
    """Advance every line by one grid step with raw values ``x``.

    Non-finite entries mean missing or non-numeric. The step order is: data
    checks and repair, daily and weekly changes, the blend fit, the error
    monitors, the moving average, the reversion fit, and finally the
    forecast stored for the monitors ``monitor_lag`` steps later.
    """
    p = state.params
    lag, t = p.monitor_lag, state.t
    x = np.asarray(x, dtype=np.float64).reshape(state.n_lines)

    if state.fault.any():
        state.recoveries += state.fault
        recover(state, np.flatnonzero(state.fault))

    validator = StreamingValidator(state.stats, state.n_lines)
    validator.zero_run = state.zero_run
    valid, usable = validator.step(x)
    state.zero_run = validator.zero_run
    y = repair_terminal_value(state, x, usable)
    seen = state.steps_seen + 1
    thr = state.stats.increment_threshold

    with np.errstate(over="ignore", invalid="ignore"):
        # increment into t
        prev = (t - 1) % (lag + 1)
        y_prev = state.y_hist[prev]
        step = y - y_prev
        i1 = valid & state.v_hist[prev] & (seen >= 2) & (np.abs(step) <= thr)

        slot_d, slot_w = t % p.tau_d, t % p.tau_w
        d_new = np.where(i1, p.r_d * step + (1.0 - p.r_d) * state.D[slot_d], state.D[slot_d])
        w_new = np.where(i1, p.r_w * step + (1.0 - p.r_w) * state.W[slot_w], state.W[slot_w])

        # monitored change over t - lag .. t
        origin = (t - lag) % (lag + 1)
        y_lag = state.y_hist[origin]
        change = y - y_lag
        i11 = valid & state.v_hist[origin] & (seen > lag) & (np.abs(change) <= thr)
        s = t % lag
        sd, sw = state.sD_hist[s], state.sW_hist[s]

        a = change - sd
        b = sw - sd
        gC = np.where(i11, p.r_g * a * b + (1.0 - p.r_g) * state.gC, state.gC)
        gV = np.where(i11, p.r_g * b * b + (1.0 - p.r_g) * state.gV, state.gV)
        g = np.clip(np.where(gV > p.eps, gC / np.where(gV > p.eps, gV, 1.0), 0.0), 0.0, 1.0)
        g = np.where(seen >= p.tau_w, g, 0.0)

        err = y - state.pred1[s]
        eM = np.where(i11, p.r_e * err * err + (1.0 - p.r_e) * state.eM, state.eM)
        eP = np.where(i11, p.r_e * change * change + (1.0 - p.r_e) * state.eP, state.eP)

        m = np.where(valid, p.r_m * y + (1.0 - p.r_m) * state.m, state.m)
        m = np.where(valid & ~state.m_init, y, m)
        m_init = state.m_init | valid

        if p.correction == "origin":
            dev = state.m_hist[origin] - y_lag
        else:
            dev = m - y
        resid = change - (1.0 - g) * sd - g * sw
        oC = np.where(i11, p.r_o * resid * dev / lag + (1.0 - p.r_o) * state.oC, state.oC)
        oV = np.where(i11, p.r_o * dev * dev + (1.0 - p.r_o) * state.oV, state.oV)
        o = np.where(oV > p.eps, oC / np.where(oV > p.eps, oV, 1.0), 0.0)

        state.D[slot_d] = d_new
        state.W[slot_w] = w_new
        slot = t % (lag + 1)
        state.y_hist[slot] = y
        state.v_hist[slot] = valid
        state.m_hist[slot] = m

        sd_next = _ring_sum(state.D, t + 1, lag)
        sw_next = _ring_sum(state.W, t + 1, lag)
        state.sD_hist[s] = sd_next
        state.sW_hist[s] = sw_next
        state.pred1[s] = y + (1.0 - g) * sd_next + g * sw_next

    state.gC, state.gV, state.eM, state.eP = gC, gV, eM, eP
    state.m, state.m_init, state.oC, state.oV = m, m_init, oC, oV
    state.g, state.o = g, o
    state.y_now = y
    state.steps_seen = seen
    state.t = t + 1

    finite = (
        np.isfinite(d_new) & np.isfinite(w_new) & np.isfinite(gC) & np.isfinite(gV)
        & np.isfinite(eM) & np.isfinite(eP) & np.isfinite(m) & np.isfinite(oC)
        & np.isfinite(oV) & np.isfinite(state.pred1[s])
    )
    state.fault = state.fault | ~finite
    return state


@dataclass
class ForecastStages:
    """Intermediate predictions of one forecast call, one entry per line."""

    y: np.ndarray
    pred1: np.ndarray
    pred2: np.ndarray
    pred3: np.ndarray
    final: np.ndarray
    gated: np.ndarray
    warm: np.ndarray


def saturate(change, k_s):
    """Squash a change into ``(-k_s, k_s)``; monotone and odd."""
    out = np.asarray(change / (1.0 + np.abs(change) / k_s), dtype=np.float64)
    # far in the tail the quotient rounds to +-k_s itself
    cap = np.nextafter(k_s, 0.0)
    return np.clip(out, -cap, cap)


def _inside(final: np.ndarray, y: np.ndarray, k_s: np.ndarray) -> np.ndarray:
    """Step ``final`` towards ``y`` until ``|final - y| < k_s`` holds in floating
    point; adding a change to a large ``y`` can round past the bound."""
    final = final.copy()
    bad = np.abs(final - y) >= k_s
    while bad.any():
        final[bad] = np.nextafter(final[bad], y[bad])
        bad = np.abs(final - y) >= k_s
    return final


def forecast_stages(state: AdaptiveState, i: Optional[int] = None) -> ForecastStages:
    p = state.params
    i = p.horizon if i is None else int(i)
    if i < 1:
        raise ConfigError("forecast horizon must be >= 1")
    y = state.y_now
    with np.errstate(over="ignore", invalid="ignore"):
        sd = _ring_sum(state.D, state.t, i)
        sw = _ring_sum(state.W, state.t, i)
        pred1 = y + (1.0 - state.g) * sd + state.g * sw
        gated = state.eM > state.eP
        pred2 = np.where(gated, y, pred1)
        pred3 = pred2 + state.o * (state.m - y) * i
        final = _inside(y + saturate(pred3 - y, state.k_s), y, state.k_s)
    need = np.where(state.recovered, p.tau_w, p.tau_d)
    warm = (state.steps_seen >= need) & ~state.fault & np.isfinite(final)
    return ForecastStages(y, pred1, pred2, pred3, np.where(warm, final, y), gated, warm)


def forecast(state: AdaptiveState, i: Optional[int] = None) -> np.ndarray:
    """Forecast ``i`` steps ahead of the last update, one value per line.

    Lines still in warmup (``tau_d`` updates from cold start, ``tau_w``
    after a recovery) or flagged as faulted get the persistence value.
    """
    return forecast_stages(state, i).final


class AdaptiveForecaster:
    """Fit/update/forecast wrapper around :class:`AdaptiveState`."""

    name = "adaptive"

    def __init__(self, params: Optional[SmoothingParams] = None, name: Optional[str] = None):
        self.params = params or SmoothingParams()
        if name:
            self.name = name
        self.state: Optional[AdaptiveState] = None

    def fit(self, values: np.ndarray, stats: ValidityStats, flags=None, line_ids=None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if flags is None:
            flags = np.where(np.isfinite(values), Flag.PRESENT, Flag.MISSING).astype(np.uint8)
        k_s = saturation_scale(values, flags, self.params, stats)
        self.state = init_state(self.params, values.shape[1], stats, k_s, line_ids)
        for row in values:
            update(self.state, row)
        return self

    def update(self, row) -> None:
        update(self.state, row)

    def forecast(self, horizon: Optional[int] = None) -> np.ndarray:
        return forecast(self.state, horizon)
