"""Binary checkpoint of an :class:`~gridcast.adaptive.AdaptiveState`.

Layout (all integers little-endian)::

    offset  size  content
    0       8     magic  b"GRIDSNAP"
    8       4     uint32 format version (currently 1)
    12      4     uint32 header length H in bytes
    16      H     header: UTF-8 JSON, sorted keys, no whitespace
    16+H    ...   state arrays, back to back, C order, in header order

The header holds ``params``, ``stats``, ``t``, ``line_ids``, a free-form
``meta`` object and ``arrays``, a list of ``[name, dtype, shape]``. Every
float in the header is written with ``float.hex`` and every array dtype is
little-endian, so a load reproduces the saved state bit for bit and saving
the same state twice yields identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, fields
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from gridcast.adaptive import STATE_ARRAYS, AdaptiveState, SmoothingParams
from gridcast.errors import GridcastError
from gridcast.quality import ValidityStats

MAGIC = b"GRIDSNAP"
VERSION = 1


class SnapshotError(GridcastError):
    """Unreadable or incompatible snapshot file."""


def _encode(value):
    if isinstance(value, float):
        return {"hex": value.hex()}
    return value


def _decode(value):
    if isinstance(value, dict) and set(value) == {"hex"}:
        return float.fromhex(value["hex"])
    return value


def dumps(state: AdaptiveState, meta: Optional[dict] = None) -> bytes:
    arrays = []
    payload = []
    for name in STATE_ARRAYS:
        arr = getattr(state, name)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        arrays.append([name, le.dtype.str, list(arr.shape)])
        payload.append(np.ascontiguousarray(le).tobytes())
    header = {
        "arrays": arrays,
        "line_ids": list(state.line_ids),
        "meta": meta or {},
        "params": {k: _encode(v) for k, v in asdict(state.params).items()},
        "stats": {k: _encode(v) for k, v in asdict(state.stats).items()},
        "t": int(state.t),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<II", VERSION, len(blob)) + blob + b"".join(payload)


def loads(data: bytes) -> Tuple[AdaptiveState, dict]:
    if data[:8] != MAGIC:
        raise SnapshotError("not a gridcast snapshot (bad magic)")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    arrays = {}
    for name, dtype, shape in header["arrays"]:
        dt = np.dtype(dtype)
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dt.itemsize
        chunk = data[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise SnapshotError(f"truncated snapshot while reading {name}")
        arrays[name] = np.frombuffer(chunk, dtype=dt).reshape(shape).astype(dt.newbyteorder("="))
        offset += nbytes
    if offset != len(data):
        raise SnapshotError("trailing bytes after snapshot payload")
    missing = set(STATE_ARRAYS) - set(arrays)
    if missing:
        raise SnapshotError(f"snapshot lacks arrays: {sorted(missing)}")
    known = {f.name for f in fields(SmoothingParams)}
    params = SmoothingParams(**{k: _decode(v) for k, v in header["params"].items() if k in known})
    stats = ValidityStats(**{k: _decode(v) for k, v in header["stats"].items()})
    state = AdaptiveState(params, stats, header["t"], line_ids=header["line_ids"], **arrays)
    return state, header["meta"]


def save(state: AdaptiveState, path: Union[str, Path], meta: Optional[dict] = None) -> None:
    Path(path).write_bytes(dumps(state, meta))


def load(path: Union[str, Path]) -> Tuple[AdaptiveState, dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    return loads(data)
