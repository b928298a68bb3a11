"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(
    fn: Callable[[], Tensor], t: Tensor, h: float = 1e-5, entries: np.ndarray | None = None
) -> np.ndarray:
    """d fn() / d t by central differences; fn must return a scalar tensor.

    With ``entries`` only those flat positions are probed (others stay 0).
    """
    grad = np.zeros_like(t.data)
    flat = t.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size) if entries is None else entries:
        orig = flat[i]
        flat[i] = orig + h
        fp = fn().item()
        flat[i] = orig - h
        fm = fn().item()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """||a - n|| / max(||a||, ||n||, floor).

    The floor keeps exactly-zero gradients (e.g. a key bias under softmax)
    from turning finite-difference noise into a large ratio.
    """
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(num / den)


def check_gradients(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> list[float]:
    """Relative errors between backward() and finite differences, one per input.

    ``max_entries`` limits the probe to a random subset of each input's
    entries; the comparison is then restricted to that subset.
    """
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    out = fn()
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]
    errors = []
    rng = rng or np.random.default_rng(0)
    for t, a in zip(inputs, analytic):
        if max_entries is None or t.data.size <= max_entries:
            errors.append(relative_error(a, numerical_grad(fn, t, h)))
            continue
        pick = np.sort(rng.choice(t.data.size, size=max_entries, replace=False))
        n = numerical_grad(fn, t, h, entries=pick)
        errors.append(relative_error(a.reshape(-1)[pick], n.reshape(-1)[pick]))
    return errors


def random_projection_loss(out_fn: Callable[[], Tensor], weights: np.ndarray) -> Callable[[], Tensor]:
    """Turn a tensor-valued function into a scalar one via a fixed random weighting."""
    from . import ops

    w = Tensor(weights)

    def fn():
        out = out_fn()
        return ops.total(ops.mul(out, Tensor(w.data.reshape(out.shape))))

    return fn
