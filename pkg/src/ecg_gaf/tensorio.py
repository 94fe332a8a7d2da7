"""Raw little-endian tensor encoding shared by image export and checkpoints.

Layout of one tensor block::

    b"GAF1" | u32 rank | u32 dim[0] ... u32 dim[rank-1] | f32 payload (row-major)

All integers and floats are little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

TENSOR_MAGIC = b"GAF1"
MAX_RANK = 8


class FormatError(ValueError):
    """Raised when a byte stream does not hold a well-formed tensor block."""


def write_tensor(stream: BinaryIO, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.ndim > MAX_RANK:
        raise ValueError(f"rank {array.ndim} exceeds maximum {MAX_RANK}")
    stream.write(TENSOR_MAGIC)
    stream.write(struct.pack("<I", array.ndim))
    stream.write(struct.pack(f"<{array.ndim}I", *array.shape))
    stream.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    buf = stream.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated tensor block: wanted {n} bytes, got {len(buf)}")
    return buf


def read_tensor(stream: BinaryIO) -> np.ndarray:
    magic = _read_exact(stream, 4)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}, expected {TENSOR_MAGIC!r}")
    (rank,) = struct.unpack("<I", _read_exact(stream, 4))
    if rank > MAX_RANK:
        raise FormatError(f"tensor rank {rank} exceeds maximum {MAX_RANK}")
    dims = struct.unpack(f"<{rank}I", _read_exact(stream, 4 * rank))
    count = int(np.prod(dims, dtype=np.int64))
    payload = _read_exact(stream, 4 * count)
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)


def save_tensor(path: str | Path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        write_tensor(f, array)


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_tensor(f)
