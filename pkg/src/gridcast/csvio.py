"""CSV wire format shared by every command.

Header ``timestamp,line_id,value``; timestamps are integer epoch seconds,
an empty value is a missing sample and ``nan``/``inf``/``-inf`` are
non-numeric payloads. Files are UTF-8 with LF line endings. Output rows are
sorted by line id, then by time.
"""

from __future__ import annotations

import csv
import logging
import math
from typing import Dict, Iterable, List, TextIO

from gridcast.errors import InvalidTimestamp
from gridcast.timeseries import Flag, SeriesWindow, TimeGrid, densify

log = logging.getLogger(__name__)

HEADER = ["timestamp", "line_id", "value"]
NONNUMERIC_LITERALS = {"nan", "inf", "-inf", "+inf"}


def parse_value(text: str):
    """``None`` for empty, a float otherwise; raises ValueError if malformed."""
    text = text.strip()
    if text == "":
        return None
    if text.lower() in NONNUMERIC_LITERALS:
        return float(text.lower())
    return float(text)


def format_value(value: float, flag: int) -> str:
    if flag == Flag.MISSING:
        return ""
    if math.isnan(value):
        return "nan"
    return repr(float(value))


def read_points(stream: TextIO) -> Dict[str, List[tuple]]:
    """Raw ``(epoch, value)`` points per line id. Malformed rows are logged
    to the module logger and skipped."""
    reader = csv.reader(stream)
    points: Dict[str, List[tuple]] = {}
    header = next(reader, None)
    if header is None:
        return points
    if [h.strip() for h in header] != HEADER:
        raise ValueError(f"expected header {','.join(HEADER)}, got {','.join(header)}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            if len(row) != 3:
                raise ValueError(f"expected 3 fields, got {len(row)}")
            ts = int(row[0].strip())
            line_id = row[1].strip()
            if not line_id:
                raise ValueError("empty line_id")
            value = parse_value(row[2])
        except ValueError as exc:
            log.warning("skipping malformed row %d: %s", lineno, exc)
            continue
        points.setdefault(line_id, []).append((ts, value))
    return points


def read_windows(stream: TextIO, grid: TimeGrid) -> Dict[str, SeriesWindow]:
    """Dense windows per line id, keyed in sorted order."""
    out = {}
    for line_id, pts in sorted(read_points(stream).items()):
        kept = []
        for ts, value in pts:
            if ts < grid.origin_epoch_s:
                log.warning("skipping %s point at %d: %s", line_id, ts,
                            InvalidTimestamp("before grid origin"))
                continue
            kept.append((ts, value))
        if kept:
            out[line_id] = densify(kept, grid, line_id)
    return out


def write_windows(windows: Iterable[SeriesWindow], grid: TimeGrid, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(HEADER)
    for win in sorted(windows, key=lambda x: x.line_id):
        for k in range(len(win)):
            w.writerow([
                grid.epoch(win.start_index + k),
                win.line_id,
                format_value(float(win.values[k]), int(win.flags[k])),
            ])
