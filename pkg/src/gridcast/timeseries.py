"""Time grid arithmetic and dense sample windows.

Raw observations arrive as ``(epoch_seconds, value)`` pairs at irregular
times. Everything downstream works on a fixed integer lattice: a timestamp
is truncated onto the step at or before it, and every lattice point between
the first and last observation gets exactly one sample, missing or not.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

from gridcast.errors import EmptyInput, InvalidTimestamp

FIVE_MINUTES = 300


class Flag(enum.IntEnum):
    PRESENT = 0
    MISSING = 1
    NONNUMERIC = 2


@dataclass(frozen=True)
class TimeGrid:
    """Integer lattice over epoch seconds."""

    origin_epoch_s: int = 0
    step_s: int = FIVE_MINUTES

    def __post_init__(self):
        if self.step_s <= 0:
            raise ValueError(f"step_s must be positive, got {self.step_s}")

    @property
    def steps_per_day(self) -> int:
        return 86400 // self.step_s

    def index(self, epoch_s: int) -> int:
        return normalize_timestamp(epoch_s, self)

    def epoch(self, index: int) -> int:
        return self.origin_epoch_s + index * self.step_s


@dataclass(frozen=True)
class Sample:
    index: int
    value: Optional[float]
    flag: Flag

    @property
    def present(self) -> bool:
        return self.flag is Flag.PRESENT


def normalize_timestamp(raw_epoch_s: int, grid: TimeGrid) -> int:
    """Grid index of ``raw_epoch_s``; in-between times round down."""
    if raw_epoch_s < grid.origin_epoch_s:
        raise InvalidTimestamp(
            f"timestamp {raw_epoch_s} precedes grid origin {grid.origin_epoch_s}"
        )
    return (int(raw_epoch_s) - grid.origin_epoch_s) // grid.step_s


def classify(value) -> Tuple[float, Flag]:
    """Map a raw payload to ``(stored float, flag)``."""
    if value is None:
        return math.nan, Flag.MISSING
    value = float(value)
    if not math.isfinite(value):
        return value, Flag.NONNUMERIC
    return value, Flag.PRESENT


class SeriesWindow:
    """Dense run of samples over consecutive grid indices for one line.

    ``values`` holds floats; absent samples are NaN with flag ``MISSING``,
    and NaN/inf payloads keep their raw bits under flag ``NONNUMERIC``.
    """

    __slots__ = ("start_index", "values", "flags", "line_id")

    def __init__(self, start_index: int, values, flags=None, line_id: str = ""):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if flags is None:
            flags = np.where(np.isnan(values), Flag.MISSING, Flag.PRESENT)
            flags[np.isinf(values)] = Flag.NONNUMERIC
        flags = np.asarray(flags, dtype=np.uint8)
        if flags.shape != values.shape:
            raise ValueError("values and flags must have the same length")
        self.start_index = int(start_index)
        self.values = values
        self.flags = flags
        self.line_id = line_id

    @classmethod
    def from_array(cls, values, start_index: int = 0, line_id: str = "") -> "SeriesWindow":
        """Build from floats; NaN means missing, +-inf means non-numeric."""
        return cls(start_index, values, None, line_id)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> Sample:
        if k < 0:
            k += len(self)
        flag = Flag(int(self.flags[k]))
        value = None if flag is Flag.MISSING else float(self.values[k])
        return Sample(self.start_index + k, value, flag)

    def __iter__(self) -> Iterator[Sample]:
        for k in range(len(self)):
            yield self[k]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SeriesWindow):
            return NotImplemented
        return (
            self.start_index == other.start_index
            and self.line_id == other.line_id
            and np.array_equal(self.flags, other.flags)
            and np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64))
        )

    def __repr__(self) -> str:
        return (
            f"SeriesWindow(line_id={self.line_id!r}, start_index={self.start_index}, "
            f"len={len(self)})"
        )

    @property
    def end_index(self) -> int:
        """Index one past the last sample."""
        return self.start_index + len(self)

    @property
    def present(self) -> np.ndarray:
        return self.flags == Flag.PRESENT

    def numeric(self) -> np.ndarray:
        """Values with every non-present sample replaced by NaN."""
        return np.where(self.present, self.values, np.nan)

    def slice(self, lo: int, hi: int) -> "SeriesWindow":
        """Sub-window over positions ``[lo, hi)``."""
        return SeriesWindow(
            self.start_index + lo, self.values[lo:hi], self.flags[lo:hi], self.line_id
        )

    def to_points(self, grid: TimeGrid) -> list:
        """Inverse of :func:`densify` for an already-dense window."""
        out = []
        for s in self:
            out.append((grid.epoch(s.index), s.value))
        return out


def densify(
    points: Iterable[Tuple[int, Optional[float]]], grid: TimeGrid, line_id: str = ""
) -> SeriesWindow:
    """Align raw points onto ``grid``.

    Points sharing a grid cell keep the last one by input order, and every
    cell between the first and last index without a point becomes missing.
    """
    cells = {}
    for epoch_s, value in points:
        cells[normalize_timestamp(epoch_s, grid)] = value
    if not cells:
        raise EmptyInput("densify needs at least one point")
    lo, hi = min(cells), max(cells)
    values = np.full(hi - lo + 1, np.nan)
    flags = np.full(hi - lo + 1, Flag.MISSING, dtype=np.uint8)
    for idx, value in cells.items():
        values[idx - lo], flags[idx - lo] = classify(value)
    return SeriesWindow(lo, values, flags, line_id)


def stack_windows(windows: Sequence[SeriesWindow]) -> Tuple[int, np.ndarray, np.ndarray]:
    """Align windows onto their common index span.

    Returns ``(start_index, values, flags)`` with arrays shaped
    ``(n_steps, n_lines)``; positions outside a window are missing.
    """
    if not windows:
        raise EmptyInput("no windows to stack")
    lo = min(w.start_index for w in windows)
    hi = max(w.end_index for w in windows)
    values = np.full((hi - lo, len(windows)), np.nan)
    flags = np.full((hi - lo, len(windows)), Flag.MISSING, dtype=np.uint8)
    for j, w in enumerate(windows):
        a = w.start_index - lo
        values[a:a + len(w), j] = w.values
        flags[a:a + len(w), j] = w.flags
    return lo, values, flags
