"""Graph layers on a mesh hierarchy: spiral convolution, residual blocks, fusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from msmr.hierarchy.spirals import SpiralTable
from msmr.numeric import ops
from msmr.numeric.tensor import DimensionError, Tensor


class SpiralMismatchError(DimensionError):
    pass


@dataclass
class SpiralConvParams:
    kernel: Tensor  # (S * C_in, C_out)
    bias: Tensor  # (C_out,)

    def check(self, length: int, c_in: int) -> None:
        if self.kernel.shape[0] != length * c_in:
            raise DimensionError(
                f"spiral kernel has {self.kernel.shape[0]} rows, expected {length} x {c_in}"
            )


@dataclass
class FeatureMap:
    level: int
    features: Tensor  # (N_level, C)


def spiral_conv(x: Tensor, spirals: SpiralTable, p: SpiralConvParams) -> Tensor:
    """Gather each vertex's spiral, concatenate, apply one shared linear map."""
    n = x.shape[0]
    if spirals.n_vertices != n:
        raise SpiralMismatchError(f"spiral table covers {spirals.n_vertices} vertices, features have {n}")
    if spirals.indices.max() >= n:
        raise SpiralMismatchError(f"spiral index {int(spirals.indices.max())} out of range for {n} vertices")
    p.check(spirals.length, x.shape[1])
    return ops.linear(ops.gather_rows(x, spirals.indices), p.kernel, p.bias)


@dataclass
class ResBlockParams:
    conv1: SpiralConvParams
    norm1: tuple[Tensor, Tensor]
    conv2: SpiralConvParams
    norm2: tuple[Tensor, Tensor]


def graph_res_block(x: Tensor, spirals: SpiralTable, p: ResBlockParams, eps: float = 1e-5) -> Tensor:
    """y = x + LN(conv(ELU(LN(conv(x)))))."""
    c_out = p.conv2.kernel.shape[1]
    if c_out != x.shape[1] or p.conv1.kernel.shape[1] * spirals.length != p.conv2.kernel.shape[0]:
        raise DimensionError(f"residual block maps {x.shape[1]} channels to {c_out}")
    h = ops.elu(ops.layer_norm(spiral_conv(x, spirals, p.conv1), *p.norm1, eps=eps))
    h = ops.layer_norm(spiral_conv(h, spirals, p.conv2), *p.norm2, eps=eps)
    return ops.add(x, h)


class FusionError(KeyError):
    pass


def fuse(
    inputs: list[FeatureMap],
    resample,
    weights: dict[tuple[int, int], Tensor],
) -> list[FeatureMap]:
    """Every output level sums all inputs resampled to it and channel-mapped.

    ``resample(src, dst)`` returns the (N_dst, N_src) sparse matrix (chained
    D for fine to coarse, chained U for coarse to fine); ``weights[(src,
    dst)]`` is the (C_src, C_dst) channel map.
    """
    out = []
    for target in inputs:
        terms = []
        for source in inputs:
            key = (source.level, target.level)
            if key not in weights:
                raise FusionError(f"no fusion weights for level {source.level} -> {target.level}")
            x = source.features
            if source.level != target.level:
                x = ops.sparse_matmul(resample(source.level, target.level), x)
            terms.append(ops.matmul(x, weights[key]))
        out.append(FeatureMap(target.level, ops.add_n(terms)))
    return out


# initialisation ------------------------------------------------------------


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(scale=np.sqrt(2.0 / (fan_in + fan_out)), size=(fan_in, fan_out))


def resampler(hierarchy):
    """Memoised ``hierarchy.resample`` as CSR matrices."""
    cache: dict[tuple[int, int], sp.csr_matrix] = {}

    def get(src: int, dst: int) -> sp.csr_matrix:
        if (src, dst) not in cache:
            cache[(src, dst)] = hierarchy.resample(src, dst)
        return cache[(src, dst)]

    return get
