from .data import Augmentation, Sample, augment, normalize_image, resize_image, rotate_vertices, warp_image
from .layers import (
    FeatureMap,
    FusionError,
    ResBlockParams,
    SpiralConvParams,
    SpiralMismatchError,
    fuse,
    graph_res_block,
    spiral_conv,
)
from .net import MeshNet, ModelConfig
from .train import EmptyDatasetError, EpochLog, TrainConfig, TrainResult, evaluate, train

__all__ = [
    "Augmentation",
    "EmptyDatasetError",
    "EpochLog",
    "FeatureMap",
    "FusionError",
    "MeshNet",
    "ModelConfig",
    "ResBlockParams",
    "Sample",
    "SpiralConvParams",
    "SpiralMismatchError",
    "TrainConfig",
    "TrainResult",
    "augment",
    "evaluate",
    "fuse",
    "graph_res_block",
    "normalize_image",
    "resize_image",
    "rotate_vertices",
    "spiral_conv",
    "train",
    "warp_image",
]
