"""Layers over the tensor primitives, registering weights in a ParamStore.

Initialization draws from a caller-supplied numpy Generator so model
construction is reproducible.  Each layer holds references to its
parameter tensors; the store owns them for optimization and I/O.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from .optim import ParamStore
from .tensor import (
    Tensor,
    add,
    conv2d,
    group_norm,
    matmul,
    mul,
    reshape,
    silu,
    softmax,
    sum_axis,
)


def _glorot(rng, shape, fan_in, fan_out, scale=1.0):
    limit = np.sqrt(6.0 / (fan_in + fan_out)) * scale
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


class Dense:
    def __init__(self, store: ParamStore, name: str, in_dim: int, out_dim: int, rng, scale=1.0):
        self.w = store.add(f"{name}.w", _glorot(rng, (in_dim, out_dim), in_dim, out_dim, scale))
        self.b = store.add(f"{name}.b", np.zeros(out_dim, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.w), self.b)


class Conv2d:
    def __init__(self, store, name, in_ch, out_ch, rng, kernel: int = 3, scale=1.0):
        if kernel not in (1, 3):
            raise DataError(f"supported kernels are 1 and 3, got {kernel}")
        fan_in = in_ch * kernel * kernel
        fan_out = out_ch * kernel * kernel
        self.w = store.add(
            f"{name}.w", _glorot(rng, (out_ch, in_ch, kernel, kernel), fan_in, fan_out, scale)
        )
        self.b = store.add(f"{name}.b", np.zeros(out_ch, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.w, self.b)


class GroupNorm:
    def __init__(self, store, name, channels, groups: int = 4):
        if channels % groups:
            raise DataError(f"{channels} channels not divisible into {groups} groups")
        self.gamma = store.add(f"{name}.gamma", np.ones(channels, dtype=np.float32))
        self.beta = store.add(f"{name}.beta", np.zeros(channels, dtype=np.float32))
        self.groups = groups

    def __call__(self, x: Tensor) -> Tensor:
        return group_norm(x, self.gamma, self.beta, groups=self.groups)


class ResidualBlock:
    """norm-silu-conv twice with a skip; optional time-embedding bias.

    The time embedding, when given, passes through a per-block dense
    projection and lands as a per-channel bias between the two convs.
    ``norm=False`` drops both group norms; generators that must stay
    sensitive to a low-rank conditioning input want this, because the
    norm's scale invariance lets the optimizer silently zero the
    conditioning pathway.
    """

    def __init__(self, store, name, in_ch, out_ch, rng, time_dim: int | None = None, norm: bool = True):
        self.norm1 = GroupNorm(store, f"{name}.norm1", in_ch) if norm else None
        self.conv1 = Conv2d(store, f"{name}.conv1", in_ch, out_ch, rng)
        self.norm2 = GroupNorm(store, f"{name}.norm2", out_ch) if norm else None
        self.conv2 = Conv2d(store, f"{name}.conv2", out_ch, out_ch, rng)
        self.time_proj = (
            Dense(store, f"{name}.time", time_dim, out_ch, rng) if time_dim else None
        )
        self.skip = (
            Conv2d(store, f"{name}.skip", in_ch, out_ch, rng, kernel=1)
            if in_ch != out_ch
            else None
        )

    def __call__(self, x: Tensor, time_emb: Tensor | None = None) -> Tensor:
        h = self.norm1(x) if self.norm1 is not None else x
        h = self.conv1(silu(h))
        if self.time_proj is not None:
            if time_emb is None:
                raise DataError("this residual block expects a time embedding")
            bias = self.time_proj(time_emb)
            h = add(h, reshape(bias, (bias.shape[0], bias.shape[1], 1, 1)))
        h = silu(h) if self.norm2 is None else silu(self.norm2(h))
        h = self.conv2(h)
        shortcut = self.skip(x) if self.skip is not None else x
        return add(h, shortcut)


class CrossAttention:
    """Feature-grid queries attending to a single conditioning token.

    With one key/value token the softmax over tokens is identically 1,
    so the block adds a projected value at every position; queries and
    keys still exist but receive zero gradient.  Kept in this general
    form so the shape contract matches a multi-token variant.
    """

    def __init__(self, store, name, channels, cond_dim, rng):
        self.q = Conv2d(store, f"{name}.q", channels, channels, rng, kernel=1)
        self.k = Dense(store, f"{name}.k", cond_dim, channels, rng)
        self.v = Dense(store, f"{name}.v", cond_dim, channels, rng)
        self.proj = Conv2d(store, f"{name}.proj", channels, channels, rng, kernel=1)
        self.scale = 1.0 / np.sqrt(channels)

    def __call__(self, x: Tensor, cond: Tensor) -> Tensor:
        batch, channels = x.shape[0], x.shape[1]
        queries = self.q(x)
        keys = reshape(self.k(cond), (batch, channels, 1, 1))
        values = reshape(self.v(cond), (batch, channels, 1, 1))
        logits = mul(sum_axis(mul(queries, keys), axis=1, keepdims=True), self.scale)
        weights = softmax(logits, axis=1)  # token axis has size 1
        attended = mul(weights, values)
        return add(x, self.proj(attended))


def sinusoidal_time_embed(t, dim: int) -> Tensor:
    """Classic sin/cos position features for integer timesteps, (B, dim)."""
    if dim % 2:
        raise DataError(f"time embedding dim must be even, got {dim}")
    t = np.asarray(t, dtype=np.float32).reshape(-1, 1)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float32) / half)
    angles = t * freqs[None, :]
    return Tensor(np.concatenate([np.sin(angles), np.cos(angles)], axis=1))


class TimeEmbed:
    """Sinusoidal features refined by a two-layer MLP."""

    def __init__(self, store, name, dim, rng):
        self.dim = dim
        self.fc1 = Dense(store, f"{name}.fc1", dim, dim, rng)
        self.fc2 = Dense(store, f"{name}.fc2", dim, dim, rng)

    def __call__(self, t) -> Tensor:
        return self.fc2(silu(self.fc1(sinusoidal_time_embed(t, self.dim))))
