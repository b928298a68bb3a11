"""Single transformer encoder block (post-norm) over the rows of a matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import Tensor


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class AttentionConfig:
    channels: int
    heads: int = 4
    hidden: int | None = None  # feed-forward width, defaults to 2 * channels

    def __post_init__(self):
        if self.heads <= 0 or self.channels % self.heads:
            raise ConfigurationError(
                f"{self.channels} channels cannot be split across {self.heads} heads"
            )

    @property
    def ffn_width(self) -> int:
        return self.hidden or 2 * self.channels


def init_attention(cfg: AttentionConfig, rng: np.random.Generator, prefix: str = "") -> dict[str, Tensor]:
    c, h = cfg.channels, cfg.ffn_width

    def w(name, rows, cols):
        return Tensor(rng.normal(0.0, 1.0 / np.sqrt(rows), (rows, cols)), True, prefix + name)

    def z(name, n):
        return Tensor(np.zeros(n), True, prefix + name)

    def one(name, n):
        return Tensor(np.ones(n), True, prefix + name)

    return {
        "wq": w("wq", c, c), "bq": z("bq", c),
        "wk": w("wk", c, c), "bk": z("bk", c),
        "wv": w("wv", c, c), "bv": z("bv", c),
        "wo": w("wo", c, c), "bo": z("bo", c),
        "ln1_g": one("ln1_g", c), "ln1_b": z("ln1_b", c),
        "w1": w("w1", c, h), "b1": z("b1", h),
        "w2": w("w2", h, c), "b2": z("b2", c),
        "ln2_g": one("ln2_g", c), "ln2_b": z("ln2_b", c),
    }


def multi_head_attention(x: Tensor, p: dict[str, Tensor], heads: int) -> Tensor:
    n, c = x.shape
    if c % heads:
        raise ConfigurationError(f"{c} channels cannot be split across {heads} heads")
    d = c // heads
    q = ops.linear(x, p["wq"], p["bq"])
    k = ops.linear(x, p["wk"], p["bk"])
    v = ops.linear(x, p["wv"], p["bv"])
    outs = []
    for h in range(heads):
        lo, hi = h * d, (h + 1) * d
        scores = ops.scale(ops.row_dots(ops.columns(q, lo, hi), ops.columns(k, lo, hi)), 1.0 / np.sqrt(d))
        weights = ops.softmax_rows(scores)
        outs.append(ops.weighted_rows(weights, ops.columns(v, lo, hi)))
    return ops.linear(ops.concat_columns(outs), p["wo"], p["bo"])


def attention_block(x: Tensor, p: dict[str, Tensor], heads: int = 4, eps: float = 1e-5) -> Tensor:
    if x.shape[1] % heads:
        raise ConfigurationError(f"{x.shape[1]} channels cannot be split across {heads} heads")
    h = ops.layer_norm(ops.add(x, multi_head_attention(x, p, heads)), p["ln1_g"], p["ln1_b"], eps)
    ff = ops.linear(ops.elu(ops.linear(h, p["w1"], p["b1"])), p["w2"], p["b2"])
    return ops.layer_norm(ops.add(h, ff), p["ln2_g"], p["ln2_b"], eps)
