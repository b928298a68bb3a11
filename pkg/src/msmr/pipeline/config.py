"""Reproducible experiment configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from msmr.model.net import ModelConfig
from msmr.model.train import TrainConfig


class ExperimentConfigError(ValueError):
    pass


def toy_model_config(**overrides) -> ModelConfig:
    """Small network for the 4-level, 20-vertex toy hierarchy and 32 px images."""
    base = dict(channels=(32, 32, 32, 32), image_size=32, encoder_channels=(16, 32), pool_grid=4, latent=64, heads=4)
    base.update(overrides)
    return ModelConfig(**base)


def toy_train_config(**overrides) -> TrainConfig:
    base = dict(epochs=30, batch_size=8, base_lr=1e-3, decay=0.5, decay_every=50, augment=False, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class ExperimentConfig:
    hierarchy: str
    model: ModelConfig = field(default_factory=toy_model_config)
    train: TrainConfig = field(default_factory=toy_train_config)
    split: dict[str, float] = field(default_factory=lambda: {"train": 1.0, "val": 0.0})
    seed: int = 0

    def __post_init__(self):
        if any(v < 0 for v in self.split.values()):
            raise ExperimentConfigError(f"split fractions must be non-negative: {self.split}")
        total = sum(self.split.values())
        if abs(total - 1.0) > 1e-9:
            raise ExperimentConfigError(f"split fractions sum to {total}, not 1")

    def split_counts(self, n: int) -> dict[str, int]:
        """Whole-sample split sizes in key order; rounding goes to the last split."""
        keys = list(self.split)
        counts = {k: int(n * self.split[k]) for k in keys[:-1]}
        counts[keys[-1]] = n - sum(counts.values())
        return counts

    def resolve(self, base: str | Path = ".") -> Path:
        p = Path(base) / self.hierarchy
        if not (p / "meta.json").exists():
            raise ExperimentConfigError(f"hierarchy directory {p} not found")
        return p

    def to_json(self) -> dict:
        return {
            "hierarchy": self.hierarchy,
            "model": self.model.to_json(),
            "train": self.train.to_json(),
            "split": dict(self.split),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        return cls(
            hierarchy=d["hierarchy"],
            model=ModelConfig.from_json(d["model"]) if "model" in d else toy_model_config(),
            train=TrainConfig.from_json(d["train"]) if "train" in d else toy_train_config(),
            split=dict(d.get("split", {"train": 1.0, "val": 0.0})),
            seed=int(d.get("seed", 0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(json.loads(Path(path).read_text()))
