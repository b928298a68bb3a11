"""Mini-batch Adam training with step-decay learning rate."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from msmr.numeric import adam_step, ops, step_decay_lr
from msmr.numeric.tensor import Tensor, zero_grads
from msmr.pipeline.seeds import substream

from .data import Augmentation, Sample, augment
from .net import MeshNet


class EmptyDatasetError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    base_lr: float = 1e-4
    decay: float = 0.5
    decay_every: int = 50
    augment: bool = True
    crop: tuple[float, float] = (0.8, 1.0)
    rotation_deg: float = 30.0
    seed: int = 0

    def lr(self, epoch: int) -> float:
        return step_decay_lr(epoch, self.base_lr, self.decay, self.decay_every)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "TrainConfig":
        d = dict(data)
        if "crop" in d:
            d["crop"] = tuple(d["crop"])
        return cls(**d)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    loss: float  # mean training loss over the epoch's (augmented) samples
    eval_loss: float = float("nan")  # loss on the un-augmented set after the epoch


@dataclass
class TrainResult:
    history: list[EpochLog] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "lr", "loss", "eval_loss"])
        for e in self.history:
            w.writerow([e.epoch, repr(e.lr), repr(e.loss), repr(e.eval_loss)])
        return buf.getvalue()


def sample_loss(model: MeshNet, sample: Sample) -> Tensor:
    return ops.l1_vertex_loss(model.forward(Tensor(sample.image)), sample.vertices)


def evaluate(model: MeshNet, samples: Sequence[Sample]) -> float:
    if not samples:
        raise EmptyDatasetError("nothing to evaluate")
    return math.fsum(sample_loss(model, s).item() for s in samples) / len(samples)


def train(
    model: MeshNet,
    samples: Sequence[Sample],
    cfg: TrainConfig,
    on_epoch: Callable[[EpochLog], None] | None = None,
    evaluate_each_epoch: bool = False,
) -> TrainResult:
    """Shuffle, augment, accumulate per-sample gradients over a batch, step.

    Randomness comes from the "shuffle" and "augment" sub-streams of
    ``cfg.seed`` so runs are reproducible.
    """
    if len(samples) == 0:
        raise EmptyDatasetError("training set is empty")
    shuffle_rng = substream(cfg.seed, "shuffle")
    aug_rng = substream(cfg.seed, "augment")
    aug = Augmentation(tuple(cfg.crop), cfg.rotation_deg)
    params = model.parameters()
    tensors = [p.tensor for p in params]
    result = TrainResult()
    for epoch in range(cfg.epochs):
        lr = cfg.lr(epoch)
        order = shuffle_rng.permutation(len(samples))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            zero_grads(tensors)
            for i in batch:
                s = samples[int(i)]
                if cfg.augment:
                    s = augment(s, aug, aug_rng)
                loss = sample_loss(model, s)
                losses.append(loss.item())
                # mean over the batch
                loss.backward(np.array([1.0 / len(batch)]))
            for t in tensors:
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
            adam_step(params, lr)
        # exact sum, so the epoch mean does not depend on the shuffle order
        log = EpochLog(epoch, lr, math.fsum(losses) / len(losses))
        if evaluate_each_epoch:
            log.eval_loss = evaluate(model, samples)
        result.history.append(log)
        if on_epoch is not None:
            on_epoch(log)
    return result
