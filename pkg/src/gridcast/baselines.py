"""Reference predictors: persistence and the two fixed seasonal forecasts.

These are strict on purpose. A missing lag raises instead of degrading, so
they can serve as clean oracles for the adaptive engine and the harness.
"""

from __future__ import annotations

from dataclasses import dataclass

from gridcast.errors import ConfigError, InsufficientHistory, NoTerminalValue
from gridcast.timeseries import Flag, SeriesWindow


@dataclass(frozen=True)
class BlendWeight:
    g: float

    def __post_init__(self):
        if not 0.0 <= self.g <= 1.0:
            raise ConfigError(f"blend weight must lie in [0, 1], got {self.g}")


def _value_at(window: SeriesWindow, k: int) -> float:
    if not 0 <= k < len(window) or window.flags[k] != Flag.PRESENT:
        raise InsufficientHistory(f"no present value at position {k}")
    return float(window.values[k])


def persistence_forecast(window: SeriesWindow, t: int, i: int) -> float:
    if not 0 <= t < len(window) or window.flags[t] != Flag.PRESENT:
        raise NoTerminalValue(f"no present value at origin {t}")
    return float(window.values[t])


def seasonal_daily_forecast(window: SeriesWindow, t: int, i: int, tau_d: int) -> float:
    """Current value plus the change observed over the same span one day earlier."""
    y_t = persistence_forecast(window, t, i)
    return y_t + _value_at(window, t + i - tau_d) - _value_at(window, t - tau_d)


def seasonal_blend_forecast(
    window: SeriesWindow, t: int, i: int, tau_d: int, tau_w: int, g
) -> float:
    """Convex blend of the day-before and week-before changes."""
    if not isinstance(g, BlendWeight):
        g = BlendWeight(float(g))
    y_t = persistence_forecast(window, t, i)
    daily = _value_at(window, t + i - tau_d) - _value_at(window, t - tau_d)
    weekly = _value_at(window, t + i - tau_w) - _value_at(window, t - tau_w)
    return y_t + (1.0 - g.g) * daily + g.g * weekly
