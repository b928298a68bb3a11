"""Image-to-mesh network with a multi-path spiral decoder.

Pipeline: strided-conv encoder stub -> latent vector -> FC + reshape onto
the coarsest mesh level -> transformer block -> one stage per hierarchy
level. Stage k works on the k coarsest levels: the newly added level is
lifted from its coarser neighbour by the upsampling matrix and a linear
channel map, every active level runs residual graph blocks, and a fusion
layer exchanges features between levels. The single-path variant keeps
only the newest level at each stage and skips fusion. A final spiral
convolution maps the finest level to xyz.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from msmr.hierarchy.pyramid import MeshHierarchy
from msmr.numeric import AttentionConfig, ConfigurationError, Parameter, attention_block, init_attention, ops
from msmr.numeric.tensor import DimensionError, Tensor

from .layers import FeatureMap, ResBlockParams, SpiralConvParams, fuse, glorot, graph_res_block, resampler, spiral_conv


@dataclass
class ModelConfig:
    channels: tuple[int, ...] = (64, 64, 32, 32, 16)  # coarse -> fine, one per stage
    image_size: int = 224
    encoder_channels: tuple[int, ...] = (16, 32)
    pool_grid: int = 4
    latent: int = 128
    heads: int = 4
    attention: bool = True
    single_path: bool = False
    blocks_per_stage: int = 1

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.encoder_channels = tuple(int(c) for c in self.encoder_channels)
        shrink = 2 ** len(self.encoder_channels)
        if self.image_size % shrink or (self.image_size // shrink) % self.pool_grid:
            raise ConfigurationError(
                f"image size {self.image_size} must be divisible by {shrink} x pool grid {self.pool_grid}"
            )
        if self.attention and self.channels[0] % self.heads:
            raise ConfigurationError(f"coarsest channels {self.channels[0]} not divisible by {self.heads} heads")

    @property
    def stages(self) -> int:
        return len(self.channels)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ModelConfig":
        return cls(**data)


@dataclass
class MeshNet:
    config: ModelConfig
    hierarchy: MeshHierarchy
    params: dict[str, Parameter] = field(default_factory=dict)

    def __post_init__(self):
        if self.config.stages != self.hierarchy.n_levels:
            raise ConfigurationError(
                f"{self.config.stages} stages configured for a {self.hierarchy.n_levels}-level hierarchy"
            )
        self._resample = resampler(self.hierarchy)

    # parameters ----------------------------------------------------------

    @classmethod
    def create(cls, config: ModelConfig, hierarchy: MeshHierarchy, rng: np.random.Generator) -> "MeshNet":
        net = cls(config, hierarchy)
        net._init(rng)
        return net

    def _add(self, name: str, value: np.ndarray) -> None:
        self.params[name] = Parameter(Tensor(value), name)

    def _init(self, rng: np.random.Generator) -> None:
        cfg, h = self.config, self.hierarchy
        L = h.n_levels
        cin = 3
        for i, c in enumerate(cfg.encoder_channels):
            self._add(f"enc{i}.w", glorot(rng, 9 * cin, c))
            self._add(f"enc{i}.b", np.zeros(c))
            cin = c
        pooled = cfg.pool_grid**2 * cin
        self._add("latent.w", glorot(rng, pooled, cfg.latent))
        self._add("latent.b", np.zeros(cfg.latent))
        n_c, c_c = h.counts[L - 1], self.level_channels(L - 1)
        self._add("fc.w", glorot(rng, cfg.latent, n_c * c_c))
        self._add("fc.b", np.zeros(n_c * c_c))
        if cfg.attention:
            for k, v in init_attention(AttentionConfig(c_c, cfg.heads), rng).items():
                self._add(f"attn.{k}", v.data)
        for stage in range(1, L + 1):
            new = L - stage
            if stage > 1:
                self._add(f"s{stage}.lift", glorot(rng, self.level_channels(new + 1), self.level_channels(new)))
            for lvl in self.stage_levels(stage):
                for b in range(cfg.blocks_per_stage):
                    self._init_block(rng, f"s{stage}.l{lvl}.b{b}", lvl)
            if not cfg.single_path and stage > 1:
                for src in self.stage_levels(stage):
                    for dst in self.stage_levels(stage):
                        cs, cd = self.level_channels(src), self.level_channels(dst)
                        w = np.eye(cs, cd) if src == dst else 0.1 * glorot(rng, cs, cd)
                        self._add(f"s{stage}.fuse.{src}.{dst}", w)
        s0 = h.spirals[0].length
        self._add("head.w", 0.1 * glorot(rng, s0 * self.level_channels(0), 3))
        self._add("head.b", np.zeros(3))

    def _init_block(self, rng: np.random.Generator, prefix: str, lvl: int) -> None:
        c = self.level_channels(lvl)
        s = self.hierarchy.spirals[lvl].length
        for k in (1, 2):
            self._add(f"{prefix}.conv{k}.w", glorot(rng, s * c, c))
            self._add(f"{prefix}.conv{k}.b", np.zeros(c))
            self._add(f"{prefix}.ln{k}.g", np.ones(c))
            self._add(f"{prefix}.ln{k}.b", np.zeros(c))

    def level_channels(self, level: int) -> int:
        # config lists channels coarse -> fine; hierarchy levels are fine -> coarse
        return self.config.channels[self.hierarchy.n_levels - 1 - level]

    def stage_levels(self, stage: int) -> list[int]:
        """Levels processed in ``stage`` (1-based), coarsest first."""
        L = self.hierarchy.n_levels
        if self.config.single_path:
            return [L - stage]
        return list(range(L - 1, L - stage - 1, -1))

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def n_parameters(self) -> int:
        return int(sum(p.tensor.data.size for p in self.params.values()))

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.tensor.data.copy() for k, p in self.params.items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        missing = sorted(set(self.params) - set(arrays))
        extra = sorted(set(arrays) - set(self.params))
        if missing or extra:
            raise ConfigurationError(f"checkpoint mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for k, p in self.params.items():
            if arrays[k].shape != p.tensor.data.shape:
                raise ConfigurationError(f"parameter {k}: shape {arrays[k].shape} != {p.tensor.data.shape}")
            p.tensor.data = np.array(arrays[k], dtype=np.float64)

    def meta(self) -> dict:
        return {"model": self.config.to_json(), "counts": self.hierarchy.counts}

    # forward ---------------------------------------------------------------

    def _t(self, name: str) -> Tensor:
        return self.params[name].tensor

    def _block(self, prefix: str) -> ResBlockParams:
        t = self._t
        return ResBlockParams(
            SpiralConvParams(t(f"{prefix}.conv1.w"), t(f"{prefix}.conv1.b")),
            (t(f"{prefix}.ln1.g"), t(f"{prefix}.ln1.b")),
            SpiralConvParams(t(f"{prefix}.conv2.w"), t(f"{prefix}.conv2.b")),
            (t(f"{prefix}.ln2.g"), t(f"{prefix}.ln2.b")),
        )

    def encode(self, image) -> Tensor:
        cfg = self.config
        x = image if isinstance(image, Tensor) else Tensor(image)
        want = (cfg.image_size, cfg.image_size, 3)
        if x.shape != want:
            raise DimensionError(f"image must have shape {want}, got {x.shape}")
        for i in range(len(cfg.encoder_channels)):
            x = ops.elu(ops.conv2d(x, self._t(f"enc{i}.w"), self._t(f"enc{i}.b"), stride=2, pad=1))
        z = ops.grid_avg_pool(x, cfg.pool_grid)
        return ops.elu(ops.linear(z, self._t("latent.w"), self._t("latent.b")))

    def forward(self, image) -> Tensor:
        """Normalised (S, S, 3) image -> (N_finest, 3) vertex positions."""
        cfg, h = self.config, self.hierarchy
        L = h.n_levels
        z = self.encode(image)
        coarse = L - 1
        f = ops.linear(z, self._t("fc.w"), self._t("fc.b"))
        f = ops.reshape(f, (h.counts[coarse], self.level_channels(coarse)))
        if cfg.attention:
            names = [k for k in self.params if k.startswith("attn.")]
            f = attention_block(f, {k[5:]: self._t(k) for k in names}, heads=cfg.heads)
        feats: dict[int, Tensor] = {coarse: f}
        for stage in range(1, L + 1):
            new = L - stage
            if stage > 1:
                up = ops.sparse_matmul(h.up[new], feats[new + 1])
                feats[new] = ops.matmul(up, self._t(f"s{stage}.lift"))
                if cfg.single_path:
                    del feats[new + 1]
            for lvl in self.stage_levels(stage):
                for b in range(cfg.blocks_per_stage):
                    feats[lvl] = graph_res_block(feats[lvl], h.spirals[lvl], self._block(f"s{stage}.l{lvl}.b{b}"))
            if not cfg.single_path and stage > 1:
                levels = self.stage_levels(stage)
                weights = {(s, d): self._t(f"s{stage}.fuse.{s}.{d}") for s in levels for d in levels}
                fused = fuse([FeatureMap(l, feats[l]) for l in levels], self._resample, weights)
                feats = {fm.level: fm.features for fm in fused}
        return spiral_conv(feats[0], h.spirals[0], SpiralConvParams(self._t("head.w"), self._t("head.b")))

    def predict(self, image: np.ndarray) -> np.ndarray:
        return self.forward(Tensor(image)).data.copy()


def config_from_file(path) -> ModelConfig:
    with open(path) as fh:
        return ModelConfig.from_json(json.load(fh))
