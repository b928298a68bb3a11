"""Differentiable operations on :class:`Tensor`.

Each function computes the forward value with numpy and attaches the exact
vector-Jacobian product. Shapes are checked eagerly; there is no implicit
broadcasting except for the bias/gain vectors documented per op.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .tensor import DimensionError, Tensor, as_tensor


def _check_2d(name: str, t: Tensor) -> None:
    if t.data.ndim != 2:
        raise DimensionError(f"{name} expects a 2-D tensor, got shape {t.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_2d("matmul", a)
    _check_2d("matmul", b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    A, B = a.data, b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ B.T)
        if b.requires_grad:
            b._accumulate(A.T @ g)

    return Tensor._wrap(A @ B, (a, b), backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ w + b with b broadcast over rows."""
    out = matmul(x, w)
    return out if b is None else add_row(out, b)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def backward(g):
        a._accumulate(g)
        b._accumulate(g)

    return Tensor._wrap(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"sub shape mismatch: {a.shape} vs {b.shape}")

    def backward(g):
        a._accumulate(g)
        b._accumulate(-g)

    return Tensor._wrap(a.data - b.data, (a, b), backward)


def add_n(terms: list[Tensor]) -> Tensor:
    if not terms:
        raise DimensionError("add_n needs at least one term")
    shape = terms[0].shape
    for t in terms:
        if t.shape != shape:
            raise DimensionError(f"add_n shape mismatch: {shape} vs {t.shape}")
    total = terms[0].data.copy()
    for t in terms[1:]:
        total += t.data

    def backward(g):
        for t in terms:
            t._accumulate(g)

    return Tensor._wrap(total, terms, backward)


def add_row(x: Tensor, bias: Tensor) -> Tensor:
    """Add a length-C vector to every row of an (N, C) tensor."""
    _check_2d("add_row", x)
    c = x.shape[1]
    if bias.size != c:
        raise DimensionError(f"bias of size {bias.size} does not match {c} channels")
    brow = bias.data.reshape(1, c)

    def backward(g):
        x._accumulate(g)
        bias._accumulate(g.sum(axis=0))

    return Tensor._wrap(x.data + brow, (x, bias), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    A, B = a.data, b.data

    def backward(g):
        a._accumulate(g * B)
        b._accumulate(g * A)

    return Tensor._wrap(A * B, (a, b), backward)


def scale(x: Tensor, s: float) -> Tensor:
    def backward(g):
        x._accumulate(g * s)

    return Tensor._wrap(x.data * s, (x,), backward)


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    X = x.data
    pos = X > 0
    ex = np.expm1(np.minimum(X, 0.0))
    out = np.where(pos, X, alpha * ex)

    def backward(g):
        x._accumulate(g * np.where(pos, 1.0, alpha * (ex + 1.0)))

    return Tensor._wrap(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)

    return Tensor._wrap(x.data * mask, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardize each row over the channel axis, then apply gain and bias."""
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    _check_2d("layer_norm", x)
    n, c = x.shape
    if c == 0:
        raise DimensionError("layer_norm over an empty channel axis")
    if gain.size != c or bias.size != c:
        raise DimensionError(f"layer_norm affine params must have {c} entries")
    X = x.data
    mu = X.mean(axis=1, keepdims=True)
    xc = X - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    G = gain.data.reshape(1, c)
    out = xhat * G + bias.data.reshape(1, c)

    def backward(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0))
        if x.requires_grad:
            gx = g * G
            dx = inv * (
                gx
                - gx.mean(axis=1, keepdims=True)
                - xhat * (gx * xhat).mean(axis=1, keepdims=True)
            )
            x._accumulate(dx)

    return Tensor._wrap(out, (x, gain, bias), backward)


def transpose(x: Tensor) -> Tensor:
    _check_2d("transpose", x)

    def backward(g):
        x._accumulate(g.T)

    return Tensor._wrap(x.data.T.copy(), (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = x.data.reshape(shape)
    if out.size != x.size:
        raise DimensionError(f"cannot reshape {x.shape} into {shape}")

    def backward(g):
        x._accumulate(g.reshape(x.shape))

    return Tensor._wrap(out.copy(), (x,), backward)


def columns(x: Tensor, start: int, stop: int) -> Tensor:
    _check_2d("columns", x)

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        x._accumulate(full)

    return Tensor._wrap(x.data[:, start:stop].copy(), (x,), backward)


def concat_columns(parts: list[Tensor]) -> Tensor:
    for p in parts:
        _check_2d("concat_columns", p)
    widths = [p.shape[1] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=1)
    bounds = np.cumsum([0] + widths)

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            p._accumulate(g[:, lo:hi])

    return Tensor._wrap(out, parts, backward)


def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """Stack ``x[index]`` along a new leading axis; index -1 yields a zero row.

    ``index`` has shape (N, S); the result has shape (N, S * C) with the
    gathered rows concatenated in order.
    """
    _check_2d("gather_rows", x)
    n_rows, c = x.shape
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.max() >= n_rows or index.min() < -1):
        raise IndexError(
            f"gather index out of range for {n_rows} rows "
            f"(min {index.min()}, max {index.max()})"
        )
    padded = np.vstack([x.data, np.zeros((1, c))])
    safe = np.where(index < 0, n_rows, index)
    out = padded[safe].reshape(index.shape[0], index.shape[1] * c)

    def backward(g):
        acc = np.zeros((n_rows + 1, c))
        np.add.at(acc, safe.reshape(-1), g.reshape(-1, c))
        x._accumulate(acc[:n_rows])

    return Tensor._wrap(out, (x,), backward)


def sparse_matmul(m: sp.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times a dense tensor (resampling between levels)."""
    _check_2d("sparse_matmul", x)
    if m.shape[1] != x.shape[0]:
        raise DimensionError(f"sparse_matmul shape mismatch: {m.shape} x {x.shape}")
    m = sp.csr_matrix(m)
    mt = m.T.tocsr()

    def backward(g):
        x._accumulate(mt @ g)

    return Tensor._wrap(np.asarray(m @ x.data), (x,), backward)


def softmax_rows(x: Tensor) -> Tensor:
    """Row softmax whose normalizer is summed in sorted order.

    Sorting makes the denominator independent of column order, so permuting
    the tokens permutes the output without any rounding drift.
    """
    _check_2d("softmax_rows", x)
    X = x.data
    e = np.exp(X - X.max(axis=1, keepdims=True))
    denom = np.sort(e, axis=1).sum(axis=1, keepdims=True)
    p = e / denom

    def backward(g):
        x._accumulate(p * (g - (g * p).sum(axis=1, keepdims=True)))

    return Tensor._wrap(p, (x,), backward)


def weighted_rows(weights: Tensor, values: Tensor) -> Tensor:
    """weights @ values with each output's terms summed in sorted order.

    Equivalent to ``matmul`` up to rounding, but exactly equivariant under a
    simultaneous permutation of the token axis of both operands.
    """
    _check_2d("weighted_rows", weights)
    _check_2d("weighted_rows", values)
    if weights.shape[1] != values.shape[0]:
        raise DimensionError(
            f"weighted_rows shape mismatch: {weights.shape} x {values.shape}"
        )
    W, V = weights.data, values.data
    terms = W[:, :, None] * V[None, :, :]
    out = np.sort(terms, axis=1).sum(axis=1)

    def backward(g):
        if weights.requires_grad:
            weights._accumulate(g @ V.T)
        if values.requires_grad:
            values._accumulate(W.T @ g)

    return Tensor._wrap(out, (weights, values), backward)


def row_dots(a: Tensor, b: Tensor) -> Tensor:
    """All pairwise row dot products a_i . b_j, computed elementwise per pair."""
    _check_2d("row_dots", a)
    _check_2d("row_dots", b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"row_dots width mismatch: {a.shape} vs {b.shape}")
    A, B = a.data, b.data
    out = (A[:, None, :] * B[None, :, :]).sum(axis=2)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ B)
        if b.requires_grad:
            b._accumulate(g.T @ A)

    return Tensor._wrap(out, (a, b), backward)


def mean_rows(x: Tensor) -> Tensor:
    """Average over the first axis; (N, C) -> (1, C)."""
    _check_2d("mean_rows", x)
    n = x.shape[0]

    def backward(g):
        x._accumulate(np.repeat(g.reshape(1, -1) / n, n, axis=0))

    return Tensor._wrap(x.data.mean(axis=0, keepdims=True), (x,), backward)


def total(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(np.full(x.shape, float(g.reshape(-1)[0])))

    return Tensor._wrap(np.array([x.data.sum()]), (x,), backward)


def _im2col_index(h: int, w: int, k: int, stride: int, pad: int):
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    if ho <= 0 or wo <= 0:
        raise DimensionError(f"kernel {k} with stride {stride} does not fit a {h}x{w} input")
    rows = (np.arange(ho) * stride)[:, None] + np.arange(k)[None, :]
    cols = (np.arange(wo) * stride)[:, None] + np.arange(k)[None, :]
    # (ho, wo, k, k) gather coordinates into the padded image
    r = np.broadcast_to(rows[:, None, :, None], (ho, wo, k, k))
    c = np.broadcast_to(cols[None, :, None, :], (ho, wo, k, k))
    return ho, wo, r, c


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D convolution on an (H, W, C_in) image with kernel (k*k*C_in, C_out).

    Output is (H_out, W_out, C_out). Implemented as patch gathering plus a
    single matrix product.
    """
    if x.data.ndim != 3:
        raise DimensionError(f"conv2d expects (H, W, C), got {x.shape}")
    h, wd, cin = x.shape
    kk = w.shape[0] // cin
    k = int(round(np.sqrt(kk)))
    if k * k * cin != w.shape[0]:
        raise DimensionError(f"kernel rows {w.shape[0]} incompatible with {cin} input channels")
    cout = w.shape[1]
    if b.size != cout:
        raise DimensionError(f"conv2d bias size {b.size} != {cout}")
    ho, wo, r, c = _im2col_index(h, wd, k, stride, pad)
    X = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)))
    patches = X[r, c].reshape(ho * wo, k * k * cin)
    out = patches @ w.data + b.data.reshape(1, cout)

    def backward(g):
        g2 = g.reshape(ho * wo, cout)
        if w.requires_grad:
            w._accumulate(patches.T @ g2)
        if b.requires_grad:
            b._accumulate(g2.sum(axis=0))
        if x.requires_grad:
            gp = (g2 @ w.data.T).reshape(ho, wo, k, k, cin)
            acc = np.zeros_like(X)
            np.add.at(acc, (r, c), gp)
            x._accumulate(acc[pad : pad + h, pad : pad + wd])

    return Tensor._wrap(out.reshape(ho, wo, cout), (x, w, b), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """(H, W, C) -> (1, C)."""
    if x.data.ndim != 3:
        raise DimensionError(f"global_avg_pool expects (H, W, C), got {x.shape}")
    h, wd, c = x.shape
    n = h * wd

    def backward(g):
        x._accumulate(np.broadcast_to(g.reshape(1, 1, c) / n, x.shape))

    return Tensor._wrap(x.data.mean(axis=(0, 1)).reshape(1, c), (x,), backward)


def grid_avg_pool(x: Tensor, grid: int) -> Tensor:
    """(H, W, C) -> (1, grid * grid * C): mean over each cell of a grid x grid split.

    Keeps coarse spatial layout, unlike a global pool. H and W must be
    divisible by ``grid``.
    """
    if x.data.ndim != 3:
        raise DimensionError(f"grid_avg_pool expects (H, W, C), got {x.shape}")
    h, wd, c = x.shape
    if h % grid or wd % grid:
        raise DimensionError(f"{h}x{wd} input is not divisible into a {grid}x{grid} grid")
    bh, bw = h // grid, wd // grid
    out = x.data.reshape(grid, bh, grid, bw, c).mean(axis=(1, 3))

    def backward(g):
        cell = g.reshape(grid, 1, grid, 1, c) / (bh * bw)
        x._accumulate(np.broadcast_to(cell, (grid, bh, grid, bw, c)).reshape(h, wd, c))

    return Tensor._wrap(out.reshape(1, grid * grid * c), (x,), backward)


def l1_vertex_loss(pred: Tensor, gt) -> Tensor:
    """Mean over vertices of the per-vertex L1 distance.

    ``gt`` is treated as a constant target. At exact zeros of the residual
    the subgradient 0 is used.
    """
    G = gt.data if isinstance(gt, Tensor) else np.asarray(gt, dtype=np.float64)
    if pred.shape != G.shape:
        raise DimensionError(f"loss shape mismatch: pred {pred.shape} vs gt {G.shape}")
    m = pred.shape[0]
    diff = pred.data - G
    loss = np.abs(diff).sum() / m

    def backward(g):
        pred._accumulate(float(g.reshape(-1)[0]) * np.sign(diff) / m)

    return Tensor._wrap(np.array([loss]), (pred,), backward)
