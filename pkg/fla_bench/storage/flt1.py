"""FLT1 binary tensor format.

Layout (little-endian):
    0..3   magic b"FLT1"
    4      version (1)
    5      dtype (0 = f32, 1 = f64)
    6      rank (1..8)
    7      zero pad
    8..    rank x u64 extents
    ...    row-major IEEE-754 payload
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from ..constants import (
    FLT1_DTYPE_F32,
    FLT1_DTYPE_F64,
    FLT1_MAGIC,
    FLT1_MAX_RANK,
    FLT1_VERSION,
)
from ..core.tensor import Tensor
from ..exceptions import FormatError
from ..logging_utils import get_logger

logger = get_logger(__name__)

_HEADER = struct.Struct("<4sBBBB")
_EXTENT = struct.Struct("<Q")
_DTYPES = {
    FLT1_DTYPE_F32: np.dtype("<f4"),
    FLT1_DTYPE_F64: np.dtype("<f8"),
}


def encode(tensor: Tensor, dtype: int = FLT1_DTYPE_F64) -> bytes:
    if dtype not in _DTYPES:
        raise FormatError(f"unsupported dtype code {dtype}")
    if tensor.rank > FLT1_MAX_RANK:
        raise FormatError(
            f"rank {tensor.rank} exceeds the FLT1 limit of {FLT1_MAX_RANK}"
        )
    header = _HEADER.pack(FLT1_MAGIC, FLT1_VERSION, dtype, tensor.rank, 0)
    extents = b"".join(_EXTENT.pack(e) for e in tensor.shape)
    payload = tensor.array.astype(_DTYPES[dtype]).tobytes(order="C")
    return header + extents + payload


def decode(blob: bytes) -> tuple[Tensor, int]:
    """Parse an FLT1 blob, returning the tensor and the stored dtype code."""
    if len(blob) < _HEADER.size:
        raise FormatError("truncated header", offset=len(blob))
    magic, version, dtype, rank, pad = _HEADER.unpack_from(blob, 0)
    if magic != FLT1_MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != FLT1_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if dtype not in _DTYPES:
        raise FormatError(f"unknown dtype code {dtype}", offset=5)
    if rank == 0 or rank > FLT1_MAX_RANK:
        raise FormatError(f"rank {rank} outside 1..{FLT1_MAX_RANK}", offset=6)
    if pad != 0:
        raise FormatError("non-zero pad byte", offset=7)

    offset = _HEADER.size
    shape = []
    for axis in range(rank):
        if len(blob) < offset + _EXTENT.size:
            raise FormatError(f"truncated extent {axis}", offset=len(blob))
        (extent,) = _EXTENT.unpack_from(blob, offset)
        if extent == 0:
            raise FormatError(f"extent {axis} is zero", offset=offset)
        shape.append(extent)
        offset += _EXTENT.size

    item = _DTYPES[dtype]
    count = math.prod(shape)
    expected = offset + count * item.itemsize
    if len(blob) != expected:
        raise FormatError(
            f"payload holds {len(blob) - offset} bytes, shape {shape} needs "
            f"{count * item.itemsize}",
            offset=min(len(blob), expected),
        )
    values = np.frombuffer(blob, dtype=item, count=count, offset=offset)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FormatError(
            "non-finite payload value", offset=offset + int(bad[0]) * item.itemsize
        )
    return Tensor(values.astype(np.float64), shape=shape), dtype


def write_tensor(
    path: str | Path, tensor: Tensor, dtype: int = FLT1_DTYPE_F64
) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode(tensor, dtype))
    except OSError as e:
        raise FormatError(f"cannot write {path}: {e}", context={"path": str(path)}) from e
    logger.debug(f"Wrote {list(tensor.shape)} tensor to {path}")


def read_tensor(path: str | Path) -> tuple[Tensor, int]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}", context={"path": str(path)}) from e
    try:
        return decode(blob)
    except FormatError as e:
        e.context.setdefault("path", str(path))
        raise
