"""Dataset files: headed CSV and a raw little-endian float64 format.

Binary layout: the 8-byte magic ``b"RQOEDAT1"``, then ``n`` and ``d`` as
little-endian uint64, then ``n*d`` little-endian float64 values in row-major
order.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = ["MAGIC", "read_binary", "read_csv", "read_points", "write_binary", "write_csv"]

MAGIC = b"RQOEDAT1"
_HEADER = struct.Struct("<8sQQ")


def write_csv(path: str | Path, data: ArrayLike, columns: list[str] | None = None) -> None:
    arr = np.atleast_2d(np.asarray(data, dtype=float))
    names = columns or [f"x{i}" for i in range(arr.shape[1])]
    if len(names) != arr.shape[1]:
        raise ValueError(f"{len(names)} column names for {arr.shape[1]} columns")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows([[repr(float(v)) for v in row] for row in arr])


def read_csv(path: str | Path) -> tuple[list[str], NDArray[np.float64]]:
    """Read a CSV whose first row names the columns; returns ``(names, (n, d) array)``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    names = [c.strip() for c in rows[0]]
    values = _parse_rows(rows[1:], len(names), path, first_line=2)
    return names, values


def read_points(path: str | Path) -> NDArray[np.float64]:
    """Read one point per row; a leading non-numeric row is taken as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no points")
    start = 1
    try:
        [float(c) for c in rows[0]]
        start = 0
    except ValueError:
        pass
    return _parse_rows(rows[start:], len(rows[start]) if rows[start:] else 0, path, first_line=start + 1)


def _parse_rows(rows, width, path, first_line):
    if not rows:
        raise ValueError(f"{path}: no data rows")
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}:{first_line + i}: expected {width} fields, got {len(row)}")
        try:
            out[i] = [float(c) for c in row]
        except ValueError as exc:
            raise ValueError(f"{path}:{first_line + i}: {exc}") from None
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{path}: non-finite values")
    return out


def write_binary(path: str | Path, data: ArrayLike) -> None:
    arr = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, d))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_binary(path: str | Path) -> NDArray[np.float64]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * n * d
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for n={n}, d={d}, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, d).astype(float)
