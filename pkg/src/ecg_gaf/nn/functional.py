"""Stateless forward/backward kernels on channels-last arrays.

Shapes use (n, h, w, c) for images, (out, in, kh, kw) for convolution
weights and (out, in) for dense weights. Convolutions are valid-padding,
stride-1 cross-correlations.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import DTYPE, ShapeError


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(n, oh, ow, kh*kw*c) patches ordered (dy, dx, channel)."""
    n, h, w, c = x.shape
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))  # n, oh, ow, c, kh, kw
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n, h - kh + 1, w - kw + 1, kh * kw * c)


def _weight_matrix(weight: np.ndarray) -> np.ndarray:
    out_ch = weight.shape[0]
    return weight.transpose(0, 2, 3, 1).reshape(out_ch, -1)


def conv2d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects (n, h, w, c) input, got shape {x.shape}")
    out_ch, in_ch, kh, kw = weight.shape
    n, h, w, c = x.shape
    if c != in_ch or h < kh or w < kw:
        raise ShapeError(f"conv2d input shape {x.shape} incompatible with weight shape {weight.shape}")
    cols = _im2col(x, kh, kw)
    out = cols.reshape(-1, cols.shape[-1]) @ _weight_matrix(weight).T
    out += bias
    return out.reshape(n, h - kh + 1, w - kw + 1, out_ch)


def conv2d_backward(
    grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (grad_input, grad_weight, grad_bias)."""
    out_ch, in_ch, kh, kw = weight.shape
    n, h, w, c = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    if grad_out.shape != (n, oh, ow, out_ch):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match conv output {(n, oh, ow, out_ch)}")
    g = grad_out.reshape(-1, out_ch)
    cols = _im2col(x, kh, kw).reshape(-1, kh * kw * c)

    grad_w = (g.T @ cols).reshape(out_ch, kh, kw, in_ch).transpose(0, 3, 1, 2)
    grad_b = g.sum(axis=0, dtype=np.float64)

    dcols = (g @ _weight_matrix(weight)).reshape(n, oh, ow, kh, kw, in_ch)
    grad_x = np.zeros(x.shape, dtype=DTYPE)
    for dy in range(kh):
        for dx in range(kw):
            grad_x[:, dy:dy + oh, dx:dx + ow, :] += dcols[:, :, :, dy, dx, :]
    return grad_x, np.ascontiguousarray(grad_w), grad_b.astype(DTYPE)


def maxpool2d_forward(x: np.ndarray, pool: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping max pool; trailing rows/columns that do not fill a window are dropped.

    Returns the pooled array and the within-window argmax (row-major, first
    maximum wins) needed by the backward pass.
    """
    if x.ndim != 4:
        raise ShapeError(f"maxpool expects (n, h, w, c) input, got shape {x.shape}")
    n, h, w, c = x.shape
    if h < pool or w < pool:
        raise ShapeError(f"maxpool window {pool} larger than input {h}x{w}")
    oh, ow = h // pool, w // pool
    win = x[:, : oh * pool, : ow * pool, :].reshape(n, oh, pool, ow, pool, c)
    win = win.transpose(0, 1, 3, 5, 2, 4).reshape(n, oh, ow, c, pool * pool)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, arg


def maxpool2d_backward(
    grad_out: np.ndarray, argmax: np.ndarray, input_shape: tuple[int, ...], pool: int = 2
) -> np.ndarray:
    if grad_out.shape != argmax.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match pooled shape {argmax.shape}")
    n, h, w, c = input_shape
    oh, ow = h // pool, w // pool
    if grad_out.shape != (n, oh, ow, c):
        raise ShapeError(f"grad_out shape {grad_out.shape} inconsistent with input shape {input_shape}")
    onehot = np.arange(pool * pool) == argmax[..., None]
    routed = (onehot * grad_out[..., None]).astype(DTYPE)
    routed = routed.reshape(n, oh, ow, c, pool, pool).transpose(0, 1, 4, 2, 5, 3)
    grad_x = np.zeros(input_shape, dtype=DTYPE)
    grad_x[:, : oh * pool, : ow * pool, :] = routed.reshape(n, oh * pool, ow * pool, c)
    return grad_x


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"dense input shape {x.shape} incompatible with weight shape {weight.shape}")
    return x @ weight.T + bias


def dense_backward(
    grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if grad_out.shape != (x.shape[0], weight.shape[0]):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match dense output {(x.shape[0], weight.shape[0])}")
    grad_b = grad_out.sum(axis=0, dtype=np.float64).astype(DTYPE)
    return grad_out @ weight, grad_out.T @ x, grad_b


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    if grad_out.shape != x.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match input shape {x.shape}")
    return np.where(x > 0, grad_out, 0).astype(grad_out.dtype, copy=False)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class LabelError(ValueError):
    pass


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) and its gradient w.r.t. the logits."""
    per_sample, grad = softmax_cross_entropy_terms(logits, labels)
    n = logits.shape[0]
    return float(per_sample.sum() / n), (grad / n).astype(DTYPE)


def softmax_cross_entropy_terms(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample losses and the un-averaged gradient (softmax - onehot), float64."""
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (n, k), got shape {logits.shape}")
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise LabelError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    per_sample = log_norm - z[rows, labels]
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return per_sample, grad
