from .pyramid import (
    DEFAULT_SPIRAL_LENGTHS,
    MeshHierarchy,
    build_hierarchy,
    halving_target,
    load_hierarchy,
    save_hierarchy,
)
from .qem import Decimation, DecimationStuckError, decimate_qem
from .spirals import PAD, SpiralTable, enumerate_spirals
from .upsample import build_upsample

__all__ = [
    "DEFAULT_SPIRAL_LENGTHS",
    "Decimation",
    "DecimationStuckError",
    "MeshHierarchy",
    "PAD",
    "SpiralTable",
    "build_hierarchy",
    "build_upsample",
    "decimate_qem",
    "enumerate_spirals",
    "halving_target",
    "load_hierarchy",
    "save_hierarchy",
]
