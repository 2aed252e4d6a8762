"""Short-term forecasting of grid flow series from recurrent fluctuations.

The streaming engine lives in :mod:`gridcast.adaptive`; batch methods and
baselines in :mod:`gridcast.recurrent` and :mod:`gridcast.baselines`;
fixtures in :mod:`gridcast.synthgen`; scoring in :mod:`gridcast.harness`.
"""

from gridcast.adaptive import (
    AdaptiveForecaster,
    AdaptiveState,
    SmoothingParams,
    forecast,
    init_state,
    recover,
    update,
)
from gridcast.errors import GridcastError
from gridcast.quality import ValidityStats, compute_global_rms
from gridcast.synthgen import GeneratorConfig, generate, generate_lines
from gridcast.timeseries import Flag, SeriesWindow, TimeGrid, densify

__all__ = [
    "AdaptiveForecaster",
    "AdaptiveState",
    "Flag",
    "GeneratorConfig",
    "GridcastError",
    "SeriesWindow",
    "SmoothingParams",
    "TimeGrid",
    "ValidityStats",
    "compute_global_rms",
    "densify",
    "forecast",
    "generate",
    "generate_lines",
    "init_state",
    "recover",
    "update",
]
