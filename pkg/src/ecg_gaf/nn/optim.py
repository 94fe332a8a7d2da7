from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import DTYPE, Tensor


class TrainingStateError(RuntimeError):
    pass


class Optimizer:
    def __init__(self, params: Sequence[Tensor], learning_rate: float):
        if learning_rate < 0:
            raise ValueError(f"learning rate must be non-negative, got {learning_rate}")
        self.params = list(params)
        self.learning_rate = float(learning_rate)

    def _grads(self) -> list[np.ndarray]:
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise TrainingStateError(f"parameter {i} {p.shape} has no gradient; run backward first")
        return [p.grad for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        """Apply one update from the accumulated gradients, then clear them."""
        self._update(self._grads())
        self.zero_grad()

    def _update(self, grads: list[np.ndarray]) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    kind = "sgd"

    def _update(self, grads):
        for p, g in zip(self.params, grads):
            p.data -= (self.learning_rate * g).astype(DTYPE)


class Adam(Optimizer):
    kind = "adam"

    def __init__(
        self,
        params: Sequence[Tensor],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        super().__init__(params, learning_rate)
        if not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("Adam eps must be positive")
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]
        self.t = 0

    def _update(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = g.astype(np.float64)
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            step = self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data[...] = (p.data - step).astype(DTYPE)


def make_optimizer(kind: str, params: Sequence[Tensor], learning_rate: float) -> Optimizer:
    if kind == "sgd":
        return SGD(params, learning_rate)
    if kind == "adam":
        return Adam(params, learning_rate)
    raise ValueError(f"unknown optimizer {kind!r}")
