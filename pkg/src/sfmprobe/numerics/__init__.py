"""Deterministic differentiable-compute core.

Float64 tensors with reverse-mode gradients, the layers the prediction
heads are built from, Huber loss, Adam, and epoch-granular learning-rate
schedules.
"""

from sfmprobe.numerics.gradcheck import grad_check
from sfmprobe.numerics.losses import huber_loss
from sfmprobe.numerics.nn import (
    gelu,
    global_mean_pool,
    init_transformer,
    layer_norm,
    linear,
    multi_head_self_attention,
    sinusoidal_positions,
    temporal_pool,
    transformer_block,
    transformer_block_forward,
    transformer_forward,
)
from sfmprobe.numerics.optim import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    AdamState,
    ScheduleSpec,
    adam_step,
    lr_at,
)
from sfmprobe.numerics.params import ParamSet
from sfmprobe.numerics.tensor import Tensor, as_tensor, concat, no_grad, softmax

__all__ = [
    "ADAM_BETA1",
    "ADAM_BETA2",
    "ADAM_EPS",
    "AdamState",
    "ParamSet",
    "ScheduleSpec",
    "Tensor",
    "adam_step",
    "as_tensor",
    "concat",
    "gelu",
    "global_mean_pool",
    "grad_check",
    "huber_loss",
    "init_transformer",
    "layer_norm",
    "linear",
    "lr_at",
    "multi_head_self_attention",
    "no_grad",
    "sinusoidal_positions",
    "softmax",
    "temporal_pool",
    "transformer_block",
    "transformer_block_forward",
    "transformer_forward",
]
