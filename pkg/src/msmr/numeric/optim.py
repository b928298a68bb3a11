"""Adam with bias correction and the step-decay learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class MissingGradientError(RuntimeError):
    pass


@dataclass
class Parameter:
    tensor: Tensor
    name: str
    moment1: np.ndarray = field(default=None)  # type: ignore[assignment]
    moment2: np.ndarray = field(default=None)  # type: ignore[assignment]
    steps: int = 0

    def __post_init__(self):
        self.tensor.requires_grad = True
        self.tensor.name = self.name
        if self.moment1 is None:
            self.moment1 = np.zeros_like(self.tensor.data)
        if self.moment2 is None:
            self.moment2 = np.zeros_like(self.tensor.data)

    @property
    def grad(self):
        return self.tensor.grad


def adam_step(
    params: list[Parameter],
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """Update every parameter in place from its populated gradient."""
    b1, b2 = betas
    for p in params:
        if p.tensor.grad is None:
            raise MissingGradientError(f"parameter {p.name!r} has no gradient")
    for p in params:
        g = p.tensor.grad
        p.steps += 1
        p.moment1 *= b1
        p.moment1 += (1.0 - b1) * g
        p.moment2 *= b2
        p.moment2 += (1.0 - b2) * g * g
        m_hat = p.moment1 / (1.0 - b1**p.steps)
        v_hat = p.moment2 / (1.0 - b2**p.steps)
        p.tensor.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


def step_decay_lr(epoch: int, base_lr: float = 1e-4, factor: float = 0.5, every: int = 50) -> float:
    """Learning rate for ``epoch`` (0-based), halved after every ``every`` epochs."""
    return base_lr * factor ** (epoch // every)
