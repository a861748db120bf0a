"""Adam and Adagrad with the learning-rate sweep grid.

Both optimizers own per-parameter buffers keyed by position in the parameter
list and mutate parameter arrays in place on :meth:`step`. Steps are pure
state transitions: the same (state, gradients) always produce the same
update. Parameters whose gradient is ``None`` are left untouched.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor

__all__ = ["Adam", "Adagrad", "make_optimizer", "lr_grid", "OPTIMIZER_KINDS"]

OPTIMIZER_KINDS = ("adam", "adagrad")


class Adam:
    """Bias-corrected first/second moment updates."""

    def __init__(self, params: list[Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g**2
            m_hat = self.m[i] / (1.0 - self.beta1**t)
            v_hat = self.v[i] / (1.0 - self.beta2**t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class Adagrad:
    """Accumulated squared gradients; step = -lr * g / sqrt(acc + eps)."""

    def __init__(self, params: list[Tensor], lr: float, eps: float = 1e-7):
        self.params = list(params)
        self.lr = lr
        self.eps = eps
        self.step_count = 0
        self.acc = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.acc[i] = self.acc[i] + g**2
            p.data = p.data - self.lr * g / np.sqrt(self.acc[i] + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def make_optimizer(kind: str, params: list[Tensor], lr: float):
    if kind == "adam":
        return Adam(params, lr)
    if kind == "adagrad":
        return Adagrad(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}; valid kinds: {', '.join(OPTIMIZER_KINDS)}")


def lr_grid() -> list[float]:
    """Learning-rate sweep: 1e-7 times powers of 3, capped at 0.1."""
    grid = []
    k = 0
    while (lr := 1e-7 * 3.0**k) <= 0.1:
        grid.append(lr)
        k += 1
    return grid
