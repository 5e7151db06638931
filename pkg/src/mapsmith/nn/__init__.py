"""Minimal neural-network core: float32 tensors with reverse-mode
autodiff, the handful of layers the map models need, Adam, and a binary
model file format.  CPU only, numpy only, deterministic given a seed."""

from .tensor import (
    Tensor,
    add,
    avgpool2,
    concat,
    conv2d,
    cross_entropy_loss,
    exp,
    group_norm,
    l2_normalize,
    matmul,
    mean,
    mse_loss,
    mul,
    reshape,
    silu,
    softmax,
    sum_axis,
    transpose2d,
    upsample_nearest2,
)
from .layers import (
    Conv2d,
    CrossAttention,
    Dense,
    GroupNorm,
    ResidualBlock,
    TimeEmbed,
    sinusoidal_time_embed,
)
from .optim import ParamStore
from .serialize import load_model, save_model

__all__ = [
    "Tensor", "add", "avgpool2", "concat", "conv2d", "cross_entropy_loss",
    "exp", "group_norm", "l2_normalize", "matmul", "mean", "mse_loss", "mul", "reshape",
    "silu", "softmax", "sum_axis", "transpose2d", "upsample_nearest2",
    "Conv2d", "CrossAttention", "Dense", "GroupNorm", "ResidualBlock",
    "TimeEmbed", "sinusoidal_time_embed",
    "ParamStore", "load_model", "save_model",
]
