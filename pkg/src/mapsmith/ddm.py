"""Denoising diffusion over scaled one-hot maps with a conditional UNet.

One-hot maps are relaxed to [-1, 1] reals, noised by a linear-beta DDPM
schedule, and denoised by a UNet that sees the timestep through sinusoidal
embeddings and the text through single-token cross-attention.  The decoded
output domain is discrete (argmax per cell), the diffusion itself is plain
Gaussian.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .embedding import hashed_embed
from .errors import DataError
from .nn import (
    ParamStore,
    Tensor,
    avgpool2,
    concat,
    load_model,
    mse_loss,
    save_model,
    silu,
    upsample_nearest2,
)
from .nn.layers import Conv2d, CrossAttention, GroupNorm, ResidualBlock, TimeEmbed
from .rng import make_rng
from .tiles import TILE_COUNT, MapGrid, ProbMap, argmax_decode


@dataclass(frozen=True)
class DiffusionSchedule:
    """Precomputed beta/alpha arrays, 1-indexed through `at` accessors."""

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    sigmas: np.ndarray

    @property
    def timesteps(self) -> int:
        return len(self.betas)

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[t - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[t - 1])

    def sigma(self, t: int) -> float:
        return float(self.sigmas[t - 1])


def make_schedule(timesteps: int = 200, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    if timesteps < 2:
        raise DataError(f"schedule needs at least 2 timesteps, got {timesteps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise DataError(f"invalid beta range [{beta_start}, {beta_end}]")
    betas = np.linspace(beta_start, beta_end, timesteps, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    return DiffusionSchedule(
        betas=betas, alphas=alphas, alpha_bars=alpha_bars, sigmas=np.sqrt(betas)
    )


def subsample_schedule(schedule: DiffusionSchedule, steps: int) -> DiffusionSchedule:
    """Shorter schedule visiting a strided subset of the original timesteps.

    The derived betas satisfy 1 - beta'_i = abar_{t_i} / abar_{t_{i-1}}, so
    the subsampled chain has the same marginals at the kept steps and the
    ancestral sampler can run in ``steps`` evaluations.
    """
    total = schedule.timesteps
    if not 2 <= steps <= total:
        raise DataError(f"steps must be in [2, {total}], got {steps}")
    picks = np.unique(np.linspace(1, total, steps).round().astype(int))
    bars = schedule.alpha_bars[picks - 1]
    prev = np.concatenate([[1.0], bars[:-1]])
    betas = 1.0 - bars / prev
    return DiffusionSchedule(
        betas=betas, alphas=1.0 - betas, alpha_bars=bars, sigmas=np.sqrt(betas)
    )


def scale_map(pm) -> np.ndarray:
    """One-hot (or probability) cells to the [-1, 1] diffusion domain."""
    values = pm.values if isinstance(pm, ProbMap) else np.asarray(pm)
    return (2.0 * values - 1.0).astype(np.float32)


def unscale_map(x: np.ndarray) -> np.ndarray:
    return ((np.asarray(x) + 1.0) / 2.0).astype(np.float32)


def decode_probs(state: np.ndarray) -> ProbMap:
    """Channel softmax of a (C, H, W) diffusion state as a distribution.

    Softmax is order-preserving, so decoding through this and taking the
    argmax matches an argmax over the raw channels.
    """
    x = np.asarray(state, dtype=np.float64)
    x = x - x.max(axis=0, keepdims=True)
    e = np.exp(x)
    probs = (e / e.sum(axis=0, keepdims=True)).transpose(1, 2, 0).astype(np.float32)
    probs = probs / probs.sum(axis=2, keepdims=True)
    return ProbMap(probs)


def forward_diffuse(schedule: DiffusionSchedule, m0: np.ndarray, t: int, eps: np.ndarray) -> np.ndarray:
    if not 1 <= t <= schedule.timesteps:
        raise DataError(f"t must be in [1, {schedule.timesteps}], got {t}")
    if np.shape(eps) != np.shape(m0):
        raise DataError(f"noise shape {np.shape(eps)} != map shape {np.shape(m0)}")
    bar = schedule.alpha_bar(t)
    return (np.sqrt(bar) * m0 + np.sqrt(1.0 - bar) * eps).astype(np.float32)


@dataclass(frozen=True)
class DdmConfig:
    embed_dim: int
    base_channels: int = 32
    channel_mults: tuple = (1, 2, 4)
    time_dim: int = 64
    height: int = 32
    width: int = 32
    channels: int = TILE_COUNT
    timesteps: int = 200
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim < 1:
            raise DataError(f"embed_dim must be positive, got {self.embed_dim}")
        levels = len(self.channel_mults) - 1
        scale = 2**levels
        if self.height % scale or self.width % scale:
            raise DataError(
                f"height and width must be divisible by {scale}, "
                f"got {self.height}x{self.width}"
            )
        if self.time_dim % 2:
            raise DataError(f"time_dim must be even, got {self.time_dim}")


class UNet:
    """Two-level conditional UNet with skip concatenation.

    Each residual block receives the time embedding; each level ends in a
    cross-attention over the single text token.  The output convolution
    starts near zero so a fresh model predicts almost-zero noise, which
    puts the untrained training loss at the unit-Gaussian variance.
    """

    def __init__(self, config: DdmConfig, store: ParamStore | None = None):
        self.config = config
        self.store = store if store is not None else ParamStore()
        rng = make_rng(config.seed, index=11)
        base = config.base_channels
        mults = config.channel_mults
        chans = [base * m for m in mults]
        tdim = config.time_dim
        edim = config.embed_dim
        s = self.store

        self.time = TimeEmbed(s, "time", tdim, rng)
        self.conv_in = Conv2d(s, "conv_in", config.channels, base, rng)

        self.down_res = [
            ResidualBlock(s, "down0.res", base, chans[0], rng, time_dim=tdim),
            ResidualBlock(s, "down1.res", chans[0], chans[1], rng, time_dim=tdim),
        ]
        self.down_attn = [
            CrossAttention(s, "down0.attn", chans[0], edim, rng),
            CrossAttention(s, "down1.attn", chans[1], edim, rng),
        ]
        self.mid_res = ResidualBlock(s, "mid.res", chans[1], chans[2], rng, time_dim=tdim)
        self.mid_attn = CrossAttention(s, "mid.attn", chans[2], edim, rng)

        self.up_res = [
            ResidualBlock(s, "up1.res", chans[2] + chans[1], chans[1], rng, time_dim=tdim),
            ResidualBlock(s, "up0.res", chans[1] + chans[0], chans[0], rng, time_dim=tdim),
        ]
        self.up_attn = [
            CrossAttention(s, "up1.attn", chans[1], edim, rng),
            CrossAttention(s, "up0.attn", chans[0], edim, rng),
        ]
        self.out_norm = GroupNorm(s, "out.norm", chans[0])
        self.out_conv = Conv2d(s, "out.conv", chans[0], config.channels, rng, scale=0.05)

    def __call__(self, x: Tensor, t: np.ndarray, emb: Tensor) -> Tensor:
        cfg = self.config
        if x.data.shape[1:] != (cfg.channels, cfg.height, cfg.width):
            raise DataError(
                f"input shape {x.data.shape[1:]} != "
                f"({cfg.channels}, {cfg.height}, {cfg.width})"
            )
        if emb.data.shape != (x.data.shape[0], cfg.embed_dim):
            raise DataError(
                f"embedding shape {emb.data.shape} != ({x.data.shape[0]}, {cfg.embed_dim})"
            )
        temb = self.time(np.asarray(t))

        h = self.conv_in(x)
        skips = []
        for res, attn in zip(self.down_res, self.down_attn):
            h = attn(res(h, temb), emb)
            skips.append(h)
            h = avgpool2(h)
        h = self.mid_attn(self.mid_res(h, temb), emb)
        for res, attn in zip(self.up_res, self.up_attn):
            h = concat([upsample_nearest2(h), skips.pop()], axis=1)
            h = attn(res(h, temb), emb)
        return self.out_conv(silu(self.out_norm(h)))


def unet_forward(model: UNet, m_t: np.ndarray, t: int, embedding: np.ndarray) -> np.ndarray:
    """Single-example noise prediction."""
    x = Tensor(np.asarray(m_t, dtype=np.float32)[None])
    emb = Tensor(np.asarray(embedding, dtype=np.float32)[None])
    return model(x, np.array([t]), emb).data[0]


@dataclass
class TrainHistory:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)


def _stack(pairs, config: DdmConfig):
    if not pairs:
        raise DataError("training needs at least one (embedding, target) pair")
    embs = np.stack([np.asarray(e, dtype=np.float32) for e, _ in pairs])
    maps = np.stack(
        [scale_map(np.asarray(t, dtype=np.float32)).transpose(2, 0, 1) for _, t in pairs]
    )
    if embs.shape[1] != config.embed_dim:
        raise DataError(f"embedding dim {embs.shape[1]} != config {config.embed_dim}")
    expected = (config.channels, config.height, config.width)
    if maps.shape[1:] != expected:
        raise DataError(f"target shape {maps.shape[1:]} != {expected}")
    return embs, maps


def ddm_train(
    pairs: Sequence,
    config: DdmConfig,
    schedule: DiffusionSchedule | None = None,
    val_pairs: Sequence = (),
    progress: Callable[[int, float], None] | None = None,
) -> tuple[UNet, TrainHistory]:
    """Noise-prediction training: t ~ U(1, T), eps ~ N(0,1), MSE(eps_hat, eps)."""
    if schedule is None:
        schedule = make_schedule(config.timesteps)
    embs, maps = _stack(pairs, config)
    model = UNet(config)
    rng = make_rng(config.seed, index=12)
    history = TrainHistory()
    n = len(pairs)
    bars = schedule.alpha_bars
    if val_pairs:
        val_embs, val_maps = _stack(val_pairs, config)
        vrng = make_rng(config.seed, index=13)
        # Fixed heldout corruption: evenly spread timesteps, one noise draw.
        val_t = np.linspace(1, schedule.timesteps, len(val_pairs)).round().astype(int)
        val_eps = vrng.normal(size=val_maps.shape).astype(np.float32)
        vb = bars[val_t - 1][:, None, None, None]
        val_mt = (np.sqrt(vb) * val_maps + np.sqrt(1 - vb) * val_eps).astype(np.float32)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            t = rng.integers(1, schedule.timesteps + 1, size=len(idx))
            eps = rng.normal(size=(len(idx),) + maps.shape[1:]).astype(np.float32)
            b = bars[t - 1][:, None, None, None]
            m_t = (np.sqrt(b) * maps[idx] + np.sqrt(1 - b) * eps).astype(np.float32)
            pred = model(Tensor(m_t), t, Tensor(embs[idx]))
            loss = mse_loss(pred, eps)
            model.store.zero_grad()
            loss.backward()
            model.store.adam_step(lr=config.lr)
            total += loss.item() * len(idx)
        history.train.append(total / n)
        if val_pairs:
            pred = model(Tensor(val_mt), val_t, Tensor(val_embs))
            history.val.append(mse_loss(pred, val_eps).item())
        if progress is not None:
            progress(len(history.train), history.train[-1])
    return model, history


@dataclass(frozen=True)
class SampleResult:
    grid: MapGrid
    frames: tuple = ()


def ddm_sample(
    model: UNet,
    prompt: str,
    seed: int,
    schedule: DiffusionSchedule | None = None,
    dump_steps: bool = False,
) -> SampleResult:
    """Ancestral sampling from pure noise, conditioned on the prompt.

    Consumes exactly ``schedule.timesteps`` UNet evaluations.  With
    ``dump_steps`` the result carries an argmax snapshot every T/10
    evaluations (the first being raw noise) plus the final map.
    """
    cfg = model.config
    if schedule is None:
        schedule = make_schedule(cfg.timesteps)
    total = schedule.timesteps
    embedding = hashed_embed(prompt, cfg.embed_dim)
    emb = Tensor(embedding[None, :])
    rng = make_rng(seed, index=5)
    m = rng.normal(size=(1, cfg.channels, cfg.height, cfg.width)).astype(np.float32)
    stride = max(total // 10, 1)
    frames = []

    def snapshot(state):
        return argmax_decode(decode_probs(state[0]))

    for done, t in enumerate(range(total, 0, -1)):
        if dump_steps and done % stride == 0 and len(frames) < 10:
            frames.append(snapshot(m))
        eps_hat = model(Tensor(m), np.array([t]), emb).data
        coef = schedule.beta(t) / np.sqrt(1.0 - schedule.alpha_bar(t))
        m = (m - coef * eps_hat) / np.sqrt(schedule.alpha(t))
        if t > 1:
            m = m + schedule.sigma(t) * rng.normal(size=m.shape)
        m = m.astype(np.float32)
    grid = snapshot(m)
    if dump_steps:
        frames.append(grid)
    return SampleResult(grid=grid, frames=tuple(frames))


def save_ddm(path, model: UNet) -> None:
    cfg = model.config
    config = {
        "kind": "ddm",
        "embed_dim": cfg.embed_dim,
        "base_channels": cfg.base_channels,
        "channel_mults": list(cfg.channel_mults),
        "time_dim": cfg.time_dim,
        "height": cfg.height,
        "width": cfg.width,
        "channels": cfg.channels,
        "timesteps": cfg.timesteps,
        "lr": cfg.lr,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
    }
    save_model(path, config, model.store.state_arrays())


def load_ddm(path) -> UNet:
    config, arrays = load_model(path)
    if config.get("kind") != "ddm":
        raise DataError(f"not a diffusion model file: kind={config.get('kind')!r}")
    fields_ = {k: v for k, v in config.items() if k != "kind"}
    fields_["channel_mults"] = tuple(fields_["channel_mults"])
    model = UNet(DdmConfig(**fields_))
    model.store.load_arrays(arrays)
    return model
