"""Binary checkpoint format for a layer stack.

::

    b"CNN1" | u32 layer_count
    per layer:
        u32 kind_tag | u32 n_hyper | u32 hyper[n_hyper]
        u32 n_params | n_params tensor blocks (GAF1 encoding, float32)

Kind tags: 1 Conv2D, 2 MaxPool2D, 3 Flatten, 4 Dense, 5 ReLU. Conv2D
hyperparameters are (in_channels, filters, kernel, relu, in_h, in_w), Dense
ones (in_features, units, relu), MaxPool2D (pool_size). Parameters are stored
as float32, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO, Sequence

from ..tensorio import FormatError, read_tensor, write_tensor
from .layers import Layer, layer_from_spec

CHECKPOINT_MAGIC = b"CNN1"
MAX_LAYERS = 1024


def write_layers(stream: BinaryIO, layers: Sequence[Layer]) -> None:
    stream.write(CHECKPOINT_MAGIC)
    stream.write(struct.pack("<I", len(layers)))
    for layer in layers:
        hyper = layer.hyperparams()
        stream.write(struct.pack(f"<II{len(hyper)}I", layer.tag, len(hyper), *hyper))
        params = layer.params()
        stream.write(struct.pack("<I", len(params)))
        for p in params:
            write_tensor(stream, p.data)


def _u32(stream: BinaryIO, count: int = 1) -> tuple[int, ...]:
    buf = stream.read(4 * count)
    if len(buf) != 4 * count:
        raise FormatError("truncated checkpoint")
    return struct.unpack(f"<{count}I", buf)


def read_layers(stream: BinaryIO) -> list[Layer]:
    magic = stream.read(4)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"not a checkpoint: magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    (count,) = _u32(stream)
    if count > MAX_LAYERS:
        raise FormatError(f"implausible layer count {count}")
    layers = []
    for i in range(count):
        tag, n_hyper = _u32(stream, 2)
        hyper = _u32(stream, n_hyper) if n_hyper else ()
        try:
            layer = layer_from_spec(tag, hyper)
        except (ValueError, TypeError) as exc:
            raise FormatError(f"layer {i}: {exc}") from None
        (n_params,) = _u32(stream)
        params = layer.params()
        if n_params != len(params):
            raise FormatError(f"layer {i} ({layer.kind}) stores {n_params} tensors, expected {len(params)}")
        for p in params:
            data = read_tensor(stream)
            if data.shape != p.shape:
                raise FormatError(f"layer {i} ({layer.kind}) tensor shape {data.shape}, expected {p.shape}")
            p.data = data.copy()
        layers.append(layer)
    if stream.read(1):
        raise FormatError("trailing bytes after checkpoint")
    return layers


def dumps(layers: Sequence[Layer]) -> bytes:
    buf = io.BytesIO()
    write_layers(buf, layers)
    return buf.getvalue()


def save(path: str | Path, layers: Sequence[Layer]) -> None:
    Path(path).write_bytes(dumps(layers))


def load(path: str | Path) -> list[Layer]:
    with open(path, "rb") as f:
        return read_layers(f)
