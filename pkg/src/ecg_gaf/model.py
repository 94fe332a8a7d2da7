"""The eight-layer GAF image classifier.

Layer stack (channels-last, valid padding, stride 1)::

    Conv2D(32, 3x3) + ReLU      (32, 32, 3) -> (30, 30, 32)
    MaxPool2D(2x2)                          -> (15, 15, 32)
    Conv2D(64, 3x3) + ReLU                  -> (13, 13, 64)
    MaxPool2D(2x2)                          -> (6, 6, 64)
    Conv2D(64, 3x3) + ReLU                  -> (4, 4, 64)
    Flatten                                 -> 1024
    Dense(64) + ReLU                        -> 64
    Dense(k)                                -> k raw class scores
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import checkpoint
from .nn.functional import softmax
from .nn.layers import Conv2D, Dense, Flatten, Layer, MaxPool2D
from .nn.tensor import DTYPE, ShapeError, Tensor, check_finite

MIN_INPUT_SIZE = 18


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """``head_units`` sets the logit width; ``None`` means ``num_classes``.

    Setting it to 10 reproduces the literal ten-unit output layer; only the
    first ``num_classes`` logits are then used for predictions.
    """

    num_classes: int
    input_size: int = 32
    input_channels: int = 3
    dense_units: int = 64
    head_units: int | None = None

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.input_size < MIN_INPUT_SIZE:
            raise ConfigError(
                f"input_size {self.input_size} too small: the conv/pool chain needs >= {MIN_INPUT_SIZE}"
            )
        if self.input_channels < 1 or self.dense_units < 1:
            raise ConfigError("input_channels and dense_units must be positive")
        if self.head_units is not None and self.head_units < self.num_classes:
            raise ConfigError(f"head_units {self.head_units} < num_classes {self.num_classes}")

    @property
    def output_units(self) -> int:
        return self.head_units if self.head_units is not None else self.num_classes

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.input_size, self.input_size, self.input_channels)


_STACK = ("Conv2D", "MaxPool2D", "Conv2D", "MaxPool2D", "Conv2D", "Flatten", "Dense", "Dense")
_RELU = (True, None, True, None, True, None, True, False)


class Model:
    def __init__(self, layers: list[Layer], config: ModelConfig):
        kinds = tuple(layer.kind for layer in layers)
        if kinds != _STACK:
            raise ConfigError(f"unexpected layer stack {kinds}")
        for layer, relu in zip(layers, _RELU):
            if relu is not None and (layer.activation == "relu") != relu:
                raise ConfigError(f"{layer.kind} activation {layer.activation!r} does not match the stack")
        self.layers = layers
        self.config = config
        self._shapes = self._audit()

    def _audit(self) -> list[tuple[int, ...]]:
        shapes = [self.config.input_shape]
        for layer in self.layers:
            shapes.append(layer.output_shape(shapes[-1]))
        if shapes[-1] != (self.config.output_units,):
            raise ConfigError(f"final width {shapes[-1]} does not match {self.config.output_units} outputs")
        return shapes

    def shape_chain(self) -> list[tuple[int, ...]]:
        """Input shape followed by the output shape of every layer."""
        return list(self._shapes)

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=DTYPE)
        if batch.ndim != 4 or batch.shape[1:] != self.config.input_shape:
            raise ShapeError(f"batch shape {batch.shape} does not match (n, {', '.join(map(str, self.config.input_shape))})")
        return batch

    def forward(self, batch: np.ndarray, train: bool = False) -> np.ndarray:
        x = self._check_batch(batch)
        for layer in self.layers:
            x = layer.forward(x, train=train)
        if __debug__:
            check_finite(x, "logits")
        return x

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = np.asarray(grad_logits, dtype=DTYPE)
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def predict(
        self, batch: np.ndarray, batch_size: int = 256, threads: int = 1
    ) -> tuple[np.ndarray, np.ndarray]:
        """Class ids (lowest index wins ties) and softmax probabilities per row."""
        batch = self._check_batch(batch)
        k = self.config.num_classes
        starts = range(0, batch.shape[0], batch_size)

        def chunk(s: int) -> np.ndarray:
            return self.forward(batch[s:s + batch_size])[:, :k]

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(chunk, starts))
        else:
            parts = [chunk(s) for s in starts]
        logits = np.concatenate(parts) if parts else np.empty((0, k), dtype=DTYPE)
        return classify(logits)

    def save(self, path: str | Path) -> None:
        checkpoint.save(path, self.layers)

    def to_bytes(self) -> bytes:
        return checkpoint.dumps(self.layers)


def classify(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Softmax rows and the logit argmax; exact ties go to the lowest class index."""
    logits = np.asarray(logits)
    return logits.argmax(axis=1), softmax(logits)


def build(cfg: ModelConfig, seed: int = 0) -> Model:
    rng = np.random.default_rng(seed)
    s, c = cfg.input_size, cfg.input_channels
    conv_out = (s - 2) // 2 - 2
    conv_out = conv_out // 2 - 2
    layers: list[Layer] = [
        Conv2D(c, 32, 3, "relu", input_hw=(s, s), rng=rng),
        MaxPool2D(2),
        Conv2D(32, 64, 3, "relu", rng=rng),
        MaxPool2D(2),
        Conv2D(64, 64, 3, "relu", rng=rng),
        Flatten(),
        Dense(conv_out * conv_out * 64, cfg.dense_units, "relu", rng=rng),
        Dense(cfg.dense_units, cfg.output_units, None, rng=rng),
    ]
    return Model(layers, cfg)


def load_model(path: str | Path, num_classes: int | None = None) -> Model:
    """Rebuild a model from a checkpoint; the config is read off the layers."""
    layers = checkpoint.load(path)
    kinds = tuple(layer.kind for layer in layers)
    if kinds != _STACK:
        raise ConfigError(f"checkpoint holds layer stack {kinds}, not the classifier stack")
    first, hidden, head = layers[0], layers[6], layers[7]
    if first.input_hw is None or first.input_hw[0] != first.input_hw[1]:
        raise ConfigError(f"checkpoint has unusable input size {first.input_hw}")
    k = num_classes if num_classes is not None else head.units
    cfg = ModelConfig(
        num_classes=k,
        input_size=first.input_hw[0],
        input_channels=first.in_channels,
        dense_units=hidden.units,
        head_units=None if head.units == k else head.units,
    )
    return Model(layers, cfg)
