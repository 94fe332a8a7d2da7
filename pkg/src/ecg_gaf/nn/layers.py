"""Layers with cached forward state and gradient-accumulating backward passes.

Calling ``forward(x, train=True)`` records what the matching ``backward``
needs; ``train=False`` records nothing, so inference on one layer object can
run from several threads at once.
"""

from __future__ import annotations

from typing import ClassVar

import numpy as np

from . import functional as F
from .tensor import DTYPE, ShapeError, Tensor

ACTIVATIONS = (None, "relu")


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


class Layer:
    kind: ClassVar[str]
    tag: ClassVar[int]

    def params(self) -> list[Tensor]:
        return []

    def hyperparams(self) -> tuple[int, ...]:
        return ()

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _saved(self):
        cache = getattr(self, "_cache", None)
        if cache is None:
            raise RuntimeError(f"{self.kind}.backward called without a training forward pass")
        return cache


def _check_activation(activation: str | None) -> None:
    if activation not in ACTIVATIONS:
        raise ValueError(f"unsupported activation {activation!r}")


class Conv2D(Layer):
    kind = "Conv2D"
    tag = 1

    def __init__(
        self,
        in_channels: int,
        filters: int,
        kernel_size: int = 3,
        activation: str | None = None,
        input_hw: tuple[int, int] | None = None,
        rng: np.random.Generator | None = None,
    ):
        _check_activation(activation)
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.activation = activation
        self.input_hw = input_hw
        k = kernel_size
        shape = (filters, in_channels, k, k)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Tensor(glorot_uniform(rng, shape, in_channels * k * k, filters * k * k))
        self.bias = Tensor(np.zeros(filters, dtype=DTYPE))
        self._cache = None

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def hyperparams(self) -> tuple[int, ...]:
        h, w = self.input_hw or (0, 0)
        return (self.in_channels, self.filters, self.kernel_size, int(self.activation == "relu"), h, w)

    def output_shape(self, input_shape):
        h, w, c = input_shape
        k = self.kernel_size
        if c != self.in_channels or h < k or w < k:
            raise ShapeError(f"Conv2D({self.filters}, {k}x{k}) cannot take input {input_shape}")
        return (h - k + 1, w - k + 1, self.filters)

    def forward(self, x, train=True):
        z = F.conv2d_forward(x, self.weight.data, self.bias.data)
        out = F.relu_forward(z) if self.activation == "relu" else z
        if train:
            self._cache = (x, z)
        return out

    def backward(self, grad_out):
        x, z = self._saved()
        if self.activation == "relu":
            grad_out = F.relu_backward(grad_out, z)
        gx, gw, gb = F.conv2d_backward(grad_out, x, self.weight.data)
        self.weight.accumulate(gw)
        self.bias.accumulate(gb)
        return gx


class MaxPool2D(Layer):
    kind = "MaxPool2D"
    tag = 2

    def __init__(self, pool_size: int = 2):
        self.pool_size = pool_size
        self._cache = None

    def hyperparams(self):
        return (self.pool_size,)

    def output_shape(self, input_shape):
        h, w, c = input_shape
        p = self.pool_size
        if h < p or w < p:
            raise ShapeError(f"MaxPool2D({p}) cannot take input {input_shape}")
        return (h // p, w // p, c)

    def forward(self, x, train=True):
        out, arg = F.maxpool2d_forward(x, self.pool_size)
        if train:
            self._cache = (x.shape, arg)
        return out

    def backward(self, grad_out):
        shape, arg = self._saved()
        return F.maxpool2d_backward(grad_out, arg, shape, self.pool_size)


class Flatten(Layer):
    kind = "Flatten"
    tag = 3

    def __init__(self):
        self._cache = None

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, train=True):
        if train:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._saved())


class Dense(Layer):
    kind = "Dense"
    tag = 4

    def __init__(
        self,
        in_features: int,
        units: int,
        activation: str | None = None,
        rng: np.random.Generator | None = None,
    ):
        _check_activation(activation)
        self.in_features = in_features
        self.units = units
        self.activation = activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Tensor(glorot_uniform(rng, (units, in_features), in_features, units))
        self.bias = Tensor(np.zeros(units, dtype=DTYPE))
        self._cache = None

    def params(self):
        return [self.weight, self.bias]

    def hyperparams(self):
        return (self.in_features, self.units, int(self.activation == "relu"))

    def output_shape(self, input_shape):
        if input_shape != (self.in_features,):
            raise ShapeError(f"Dense({self.in_features}->{self.units}) cannot take input {input_shape}")
        return (self.units,)

    def forward(self, x, train=True):
        z = F.dense_forward(x, self.weight.data, self.bias.data)
        out = F.relu_forward(z) if self.activation == "relu" else z
        if train:
            self._cache = (x, z)
        return out

    def backward(self, grad_out):
        x, z = self._saved()
        if self.activation == "relu":
            grad_out = F.relu_backward(grad_out, z)
        gx, gw, gb = F.dense_backward(grad_out, x, self.weight.data)
        self.weight.accumulate(gw)
        self.bias.accumulate(gb)
        return gx


class ReLU(Layer):
    kind = "ReLU"
    tag = 5

    def __init__(self):
        self._cache = None

    def output_shape(self, input_shape):
        return input_shape

    def forward(self, x, train=True):
        if train:
            self._cache = x
        return F.relu_forward(x)

    def backward(self, grad_out):
        return F.relu_backward(grad_out, self._saved())


LAYER_TYPES: dict[int, type[Layer]] = {cls.tag: cls for cls in (Conv2D, MaxPool2D, Flatten, Dense, ReLU)}


def layer_from_spec(tag: int, hyper: tuple[int, ...]) -> Layer:
    """Rebuild a layer (with placeholder parameters) from its checkpoint record."""
    if tag == Conv2D.tag:
        in_ch, filters, k, relu, h, w = hyper
        return Conv2D(in_ch, filters, k, "relu" if relu else None, (h, w) if h and w else None)
    if tag == MaxPool2D.tag:
        return MaxPool2D(*hyper)
    if tag == Flatten.tag:
        return Flatten()
    if tag == Dense.tag:
        in_f, units, relu = hyper
        return Dense(in_f, units, "relu" if relu else None)
    if tag == ReLU.tag:
        return ReLU()
    raise ValueError(f"unknown layer tag {tag}")
