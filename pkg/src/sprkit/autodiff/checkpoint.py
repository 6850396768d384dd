"""Flat binary checkpoint format.

Layout: 8-byte magic ``SPRKIT01``, then one record per array:
``u32 name_len | name bytes (utf-8) | u32 rank | u32 extents[rank] |
f64 values[prod(extents)]``, everything little-endian. Records run to
end of file. Run metadata (seed, config hash) travels as rank-0 records
whose names are ``__meta__:key=value``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from .engine import Tensor

MAGIC = b"SPRKIT01"
_META_PREFIX = "__meta__:"


def save_checkpoint(path: str | Path, params: dict[str, Tensor | np.ndarray],
                    meta: dict[str, str] | None = None) -> None:
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        if meta:
            for key in sorted(meta):
                _write_record(f, f"{_META_PREFIX}{key}={meta[key]}",
                              np.zeros(()))
        for name in params:
            arr = params[name]
            data = arr.data if isinstance(arr, Tensor) else np.asarray(arr)
            _write_record(f, name, np.asarray(data, dtype=np.float64))


def _write_record(f, name: str, data: np.ndarray) -> None:
    nb = name.encode("utf-8")
    f.write(struct.pack("<I", len(nb)))
    f.write(nb)
    f.write(struct.pack("<I", data.ndim))
    for ext in data.shape:
        f.write(struct.pack("<I", ext))
    f.write(data.astype("<f8").tobytes(order="C"))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Read back (params, meta); raises DataFormatError with the byte offset
    of the first malformed field."""
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise DataFormatError(
            f"bad checkpoint magic at offset 0: {blob[:8]!r}", offset=0)
    params: dict[str, np.ndarray] = {}
    meta: dict[str, str] = {}
    at = 8
    total = len(blob)
    while at < total:
        name, arr, at = _read_record(blob, at)
        if name.startswith(_META_PREFIX):
            key, _, value = name[len(_META_PREFIX):].partition("=")
            meta[key] = value
        else:
            params[name] = arr
    return params, meta


def _read_u32(blob: bytes, at: int, what: str) -> tuple[int, int]:
    if at + 4 > len(blob):
        raise DataFormatError(f"truncated {what} at offset {at}", offset=at)
    return struct.unpack_from("<I", blob, at)[0], at + 4


def _read_record(blob: bytes, at: int) -> tuple[str, np.ndarray, int]:
    name_len, at = _read_u32(blob, at, "name length")
    if at + name_len > len(blob):
        raise DataFormatError(f"truncated name at offset {at}", offset=at)
    name = blob[at:at + name_len].decode("utf-8")
    at += name_len
    rank, at = _read_u32(blob, at, "rank")
    extents = []
    for _ in range(rank):
        ext, at = _read_u32(blob, at, "extent")
        extents.append(ext)
    count = int(np.prod(extents, dtype=np.int64)) if extents else 1
    nbytes = count * 8
    if at + nbytes > len(blob):
        raise DataFormatError(f"truncated values at offset {at}", offset=at)
    arr = np.frombuffer(blob, dtype="<f8", count=count, offset=at).reshape(extents)
    return name, arr.astype(np.float64), at + nbytes
