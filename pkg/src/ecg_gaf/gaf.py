"""Gramian Angular Field encoding of 1-D series into images.

Pipeline for one heartbeat::

    rescale to [-1, 1] -> arccos -> cos(phi_i + phi_j)   (GASF)
                                  or sin(phi_i - phi_j)   (GADF)
    -> reduce to target_size x target_size -> replicate into C channels

Reduction happens either on the image (bilinear, the default) or on the
series before the Gramian step (piecewise aggregate approximation).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .signal_io import HeartbeatRecord

GafKind = Literal["gasf", "gadf"]
Reduction = Literal["bilinear", "paa"]


@dataclass(frozen=True)
class NormalizedSeries:
    values: np.ndarray
    angles: np.ndarray
    radii: np.ndarray

    @property
    def length(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class GafMatrix:
    entries: np.ndarray
    kind: GafKind


@dataclass(frozen=True)
class GafImage:
    """(H, W, C) array with every pixel in [-1, 1]."""

    pixels: np.ndarray

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[2])


@dataclass(frozen=True)
class EncoderConfig:
    kind: GafKind = "gasf"
    reduction: Reduction = "bilinear"
    target_size: int = 32
    channels: int = 3

    def __post_init__(self) -> None:
        if self.kind not in ("gasf", "gadf"):
            raise ValueError(f"unknown GAF kind {self.kind!r}")
        if self.reduction not in ("bilinear", "paa"):
            raise ValueError(f"unknown reduction {self.reduction!r}")
        if self.target_size < 2:
            raise ValueError(f"target_size must be >= 2, got {self.target_size}")
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")

    def key(self) -> str:
        return f"{self.kind}-{self.reduction}-{self.target_size}-{self.channels}"


def rescale(series: Sequence[float] | np.ndarray) -> NormalizedSeries:
    """Min-max scale onto [-1, 1] and attach the polar angle and radius.

    A constant series has no range to scale; it maps to all zeros
    (angle pi/2) rather than raising.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"expected a non-empty 1-D series, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    hi, lo = x.max(), x.min()
    if hi == lo:
        values = np.zeros_like(x)
    else:
        values = ((x - hi) + (x - lo)) / (hi - lo)
    values = np.clip(values, -1.0, 1.0)
    n = x.size
    return NormalizedSeries(values, np.arccos(values), np.arange(1, n + 1) / n)


def gasf(ns: NormalizedSeries) -> GafMatrix:
    phi = ns.angles
    # phi_i + phi_j is bitwise commutative, so the result is exactly symmetric.
    return GafMatrix(np.cos(phi[:, None] + phi[None, :]), "gasf")


def gadf(ns: NormalizedSeries) -> GafMatrix:
    phi = ns.angles
    upper = np.triu(np.sin(phi[:, None] - phi[None, :]), k=1)
    return GafMatrix(upper - upper.T, "gadf")


def paa(series: Sequence[float] | np.ndarray, m: int) -> np.ndarray:
    """Piecewise aggregate approximation to ``m`` segments of length N/m.

    Samples straddling a segment boundary contribute to both segments in
    proportion to their overlap.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"segment count must lie in [1, {n}], got {m}")
    return paa_matrix(n, m) @ x


def paa_matrix(n: int, m: int) -> np.ndarray:
    # Scale time by n*m: sample i covers [i*m, (i+1)*m), segment j covers [j*n, (j+1)*n).
    i = np.arange(n)
    j = np.arange(m)
    lo = np.maximum(i[None, :] * m, j[:, None] * n)
    hi = np.minimum((i[None, :] + 1) * m, (j[:, None] + 1) * n)
    return np.clip(hi - lo, 0, None) / n


def _bilinear_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) interpolation matrix, half-pixel centres, edge clamped."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = src - i0
    w = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(w, (rows, i0), 1.0 - t)
    np.add.at(w, (rows, i1), t)
    return w


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    h, w = image.shape
    if h < 2 or w < 2:
        raise ValueError(f"input must be at least 2x2, got {h}x{w}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    return _bilinear_weights(h, out_h) @ image @ _bilinear_weights(w, out_w).T


def _gramian(ns: NormalizedSeries, kind: GafKind) -> np.ndarray:
    return (gasf(ns) if kind == "gasf" else gadf(ns)).entries


def encode(record: HeartbeatRecord | np.ndarray, cfg: EncoderConfig = EncoderConfig()) -> GafImage:
    series = record.samples if isinstance(record, HeartbeatRecord) else np.asarray(record, dtype=np.float64)
    ns = rescale(series)
    size = cfg.target_size
    if cfg.reduction == "paa":
        if size > ns.length:
            raise ValueError(f"cannot reduce a length-{ns.length} series to {size} segments")
        # PAA of values in [-1, 1] stays in [-1, 1]; re-derive the angles.
        values = np.clip(paa(ns.values, size), -1.0, 1.0)
        ns = NormalizedSeries(values, np.arccos(values), np.arange(1, size + 1) / size)
        plane = _gramian(ns, cfg.kind)
    else:
        plane = _gramian(ns, cfg.kind)
        if plane.shape != (size, size):
            plane = resize_bilinear(plane, size, size)
    plane = np.clip(plane, -1.0, 1.0)
    return GafImage(np.repeat(plane[:, :, None], cfg.channels, axis=2))


def encode_batch(
    samples: np.ndarray, cfg: EncoderConfig = EncoderConfig(), threads: int = 1
) -> np.ndarray:
    """Encode every row of ``samples`` into an (n, H, W, C) float32 array.

    Records are independent, so the result does not depend on ``threads``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    size = cfg.target_size
    out = np.empty((samples.shape[0], size, size, cfg.channels), dtype=np.float32)

    def work(i: int) -> None:
        out[i] = encode(samples[i], cfg).pixels

    if threads <= 1:
        for i in range(samples.shape[0]):
            work(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(samples.shape[0])))
    return out


def to_bytes(img: GafImage | np.ndarray) -> np.ndarray:
    """Channel 0 mapped from [-1, 1] to uint8, rounding halves up."""
    pixels = img.pixels if isinstance(img, GafImage) else np.asarray(img)
    plane = pixels[:, :, 0] if pixels.ndim == 3 else pixels
    scaled = (np.asarray(plane, dtype=np.float64) + 1.0) / 2.0 * 255.0
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def export_image(img: GafImage | np.ndarray, path: str | Path) -> None:
    from PIL import Image

    Image.fromarray(to_bytes(img)).save(path, format="PNG")
