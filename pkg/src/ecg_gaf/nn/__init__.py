"""Small channels-last CNN engine: kernels, layers, optimizers, checkpoints."""

from .checkpoint import CHECKPOINT_MAGIC
from .functional import (
    LabelError,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_cross_entropy,
)
from .layers import Conv2D, Dense, Flatten, Layer, MaxPool2D, ReLU
from .optim import SGD, Adam, Optimizer, TrainingStateError, make_optimizer
from .tensor import NonFiniteError, ShapeError, Tensor

__all__ = [
    "CHECKPOINT_MAGIC",
    "Adam",
    "Conv2D",
    "Dense",
    "Flatten",
    "LabelError",
    "Layer",
    "MaxPool2D",
    "NonFiniteError",
    "Optimizer",
    "ReLU",
    "SGD",
    "ShapeError",
    "Tensor",
    "TrainingStateError",
    "conv2d_backward",
    "conv2d_forward",
    "dense_backward",
    "dense_forward",
    "make_optimizer",
    "maxpool2d_backward",
    "maxpool2d_forward",
    "relu_backward",
    "relu_forward",
    "softmax",
    "softmax_cross_entropy",
]
