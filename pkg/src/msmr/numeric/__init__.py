from .attention import AttentionConfig, ConfigurationError, attention_block, init_attention
from .ops import elu, l1_vertex_loss, layer_norm, matmul
from .optim import MissingGradientError, Parameter, adam_step, step_decay_lr
from .tensor import DimensionError, Tensor

__all__ = [
    "AttentionConfig",
    "ConfigurationError",
    "DimensionError",
    "MissingGradientError",
    "Parameter",
    "Tensor",
    "adam_step",
    "attention_block",
    "elu",
    "init_attention",
    "l1_vertex_loss",
    "layer_norm",
    "matmul",
    "step_decay_lr",
]
