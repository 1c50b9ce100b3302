"""Binary field snapshots.

Layout (all little-endian): magic ``CHTX1``, version byte, nx and ny as
uint64, lx and ly as float64, then nx·ny float64 values in row-major order
(x fastest).
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..mesh import Grid, ScalarField

MAGIC = b"CHTX1"
VERSION = 1
_HEADER = struct.Struct("<5sBQQdd")


class SnapshotError(ValueError):
    pass


def snapshot_bytes(field: ScalarField) -> bytes:
    g = field.grid
    head = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.lx, g.ly)
    return head + np.ascontiguousarray(field.values, dtype="<f8").tobytes()


def parse_snapshot(data: bytes) -> ScalarField:
    if len(data) < _HEADER.size:
        if not MAGIC.startswith(data[:5]):
            raise SnapshotError("bad magic")
        raise SnapshotError("truncated snapshot")
    magic, version, nx, ny, lx, ly = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError("bad magic")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    n = nx * ny
    body = len(data) - _HEADER.size
    if body < 8 * n:
        raise SnapshotError("truncated snapshot")
    if body > 8 * n:
        raise SnapshotError("trailing bytes after snapshot values")
    try:
        grid = Grid(nx, ny, lx, ly)
    except ValueError as e:
        raise SnapshotError(f"bad snapshot header: {e}") from None
    vals = np.frombuffer(data, dtype="<f8", count=n, offset=_HEADER.size).astype(float)
    return ScalarField(grid, vals.reshape(ny, nx))


def write_snapshot(field: ScalarField, path) -> Path:
    path = Path(path)
    path.write_bytes(snapshot_bytes(field))
    return path


def read_snapshot(path) -> ScalarField:
    return parse_snapshot(Path(path).read_bytes())
