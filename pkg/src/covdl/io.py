"""Matrix files: a small self-describing binary container plus CSV.

Binary layout, little-endian: magic ``CVDL``, version u16 (currently 1),
rows u32, cols u32, then rows*cols float64 values in row-major order.
CSV files are plain comma-delimited numeric tables with no header.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "write_matrix",
    "read_matrix",
    "write_matrix_csv",
    "read_matrix_csv",
    "read_any_matrix",
    "write_key_values",
    "read_key_values",
]

_MAGIC = b"CVDL"
_VERSION = 1
_HEADER = struct.Struct("<4sHII")


def write_matrix(path, arr) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError("only 2-D matrices are supported")
    rows, cols = arr.shape
    if rows >= 2**32 or cols >= 2**32:
        raise ValueError("matrix too large for the container header")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, rows, cols))
        fh.write(arr.tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a CVDL matrix file")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        body = fh.read()
    expected = rows * cols * 8
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def write_matrix_csv(path, arr) -> None:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2:
        raise ValueError("only 2-D matrices are supported")
    with open(path, "w") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    out = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    return out


def read_any_matrix(path) -> np.ndarray:
    """Dispatch on extension: ``.cvdl`` binary, anything else as CSV."""
    if Path(path).suffix.lower() == ".cvdl":
        return read_matrix(path)
    return read_matrix_csv(path)


def write_key_values(path, items) -> None:
    """Write ``key = value`` lines; ``items`` is a mapping or pair iterable."""
    pairs = items.items() if hasattr(items, "items") else items
    with open(path, "w") as fh:
        for k, v in pairs:
            fh.write(f"{k} = {v}\n")


def read_key_values(path) -> dict:
    out: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
