"""Snapshots, CSV time series and JSON run reports.

Snapshot layout (little-endian throughout)::

    magic        6 bytes   b"GDNLS1"
    n_points     uint32
    domain_len   float64
    time         float64
    sigma        float64
    payload      n_points x (real, imag) float64

Floats are written as-is, so ``read_snapshot(write_snapshot(f))`` returns
the same bits.  CSV cells use ``repr`` of Python floats (shortest
round-trip form, '.' decimal separator).
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import Field, Grid

MAGIC = b"GDNLS1"
_HEADER = struct.Struct("<6sIddd")
HEADER_SIZE = _HEADER.size

GDNLS_COLUMNS = ("t", "mass", "energy", "momentum", "l2", "h1", "linf", "boundary_mass")
GAUGED_COLUMNS = ("t", "l2", "h1", "linf", "boundary_mass", "relation_residual")


class SnapshotFormatError(ValueError):
    """The bytes do not form a valid snapshot."""


@dataclass(frozen=True, eq=False)
class Snapshot:
    field: Field
    time: float
    sigma: float


def snapshot_bytes(f: Field, time: float, sigma: float) -> bytes:
    head = _HEADER.pack(MAGIC, f.grid.n_points, f.grid.domain_length, float(time), float(sigma))
    return head + np.ascontiguousarray(f.values, dtype="<c16").tobytes()


def parse_snapshot(buf: bytes) -> Snapshot:
    if len(buf) < HEADER_SIZE:
        raise SnapshotFormatError(f"{len(buf)} bytes is shorter than the {HEADER_SIZE}-byte header")
    magic, n, length, time, sigma = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if len(buf) - HEADER_SIZE != 16 * n:
        raise SnapshotFormatError(f"payload has {len(buf) - HEADER_SIZE} bytes, expected {16 * n}")
    values = np.frombuffer(buf, dtype="<c16", offset=HEADER_SIZE, count=n)
    return Snapshot(Field(Grid(n, length), values), time, sigma)


def write_snapshot(path, f: Field, time: float, sigma: float) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(snapshot_bytes(f, time, sigma))
    return path


def read_snapshot(path) -> Snapshot:
    return parse_snapshot(Path(path).read_bytes())


# --- CSV and JSON ---------------------------------------------------------


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path, columns, rows) -> Path:
    """Header row plus one line per row; rows are sequences or dicts keyed by column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c) for c in columns]
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def series_rows(times, series: dict, columns) -> list:
    """Rows of a time-series CSV from a trajectory's ``invariant_series``."""
    out = []
    for i, t in enumerate(times):
        out.append([t] + [series[c][i] for c in columns[1:]])
    return out


def to_jsonable(obj):
    """Plain Python tree: numpy scalars and arrays unwrapped, non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_report(report))
    return path


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())
