"""Exception hierarchy shared by every gridcast module."""


class GridcastError(Exception):
    """Base class for all errors raised by gridcast."""


class InvalidTimestamp(GridcastError, ValueError):
    """A timestamp falls before the grid origin."""


class EmptyInput(GridcastError, ValueError):
    """An operation that needs at least one point received none."""


class NoData(GridcastError, ValueError):
    """No usable (present, numeric) samples were found."""


class NoTerminalValue(GridcastError, ValueError):
    """The value at the forecast origin is absent or non-numeric."""


class InsufficientHistory(GridcastError, ValueError):
    """A lagged sample required by a forecaster is unavailable."""


class ConfigError(GridcastError, ValueError):
    """Invalid parameters or configuration."""


class NoEvaluablePoints(GridcastError, ValueError):
    """An evaluation produced no scoreable forecast/target pairs."""
