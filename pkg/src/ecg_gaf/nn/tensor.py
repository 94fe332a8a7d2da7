from __future__ import annotations

import numpy as np

DTYPE = np.float32
MAX_RANK = 4


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    """A float32 array plus an optional gradient buffer of the same shape.

    ``grad`` stays ``None`` until a backward pass deposits something into it;
    backward passes accumulate, they never overwrite.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, grad: np.ndarray | None = None):
        data = np.ascontiguousarray(data, dtype=DTYPE)
        if data.ndim > MAX_RANK:
            raise ShapeError(f"rank {data.ndim} exceeds {MAX_RANK}")
        self.data = data
        self.grad = grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match tensor shape {self.data.shape}")
        g = g.astype(DTYPE, copy=False)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, grad={'set' if self.grad is not None else 'none'})"


def check_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"non-finite values in {what}")
