"""Feed-forward text-to-map model.

A text embedding concatenated with a small noise vector is projected to a
coarse feature grid, upsampled through three residual stages, and read out
as a per-cell tile distribution.  Cheap to train and intentionally modest:
the model memorizes its corpus rather than generalizing, which is the
point of comparison with the diffusion model.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .embedding import hashed_embed
from .errors import DataError
from .nn import (
    ParamStore,
    Tensor,
    concat,
    cross_entropy_loss,
    load_model,
    mse_loss,
    mul,
    reshape,
    save_model,
    softmax,
    upsample_nearest2,
)
from .nn.layers import Conv2d, Dense, ResidualBlock
from .rng import make_rng
from .tiles import TILE_COUNT, MapGrid, ProbMap, argmax_decode

STAGES = 3  # three residual+upsample stages: H/8 -> H


@dataclass(frozen=True)
class FdmConfig:
    embed_dim: int
    noise_dim: int = 16
    base_channels: int = 64
    height: int = 32
    width: int = 32
    channels: int = TILE_COUNT
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    loss: str = "mse"  # "mse" (default head) or "cross_entropy"

    def __post_init__(self):
        if self.embed_dim < 1:
            raise DataError(f"embed_dim must be positive, got {self.embed_dim}")
        scale = 2**STAGES
        if self.height % scale or self.width % scale:
            raise DataError(
                f"height and width must be divisible by {scale}, "
                f"got {self.height}x{self.width}"
            )
        if self.loss not in ("mse", "cross_entropy"):
            raise DataError(f"unknown loss {self.loss!r}")

    @property
    def seed_shape(self) -> tuple[int, int]:
        return self.height // 2**STAGES, self.width // 2**STAGES


@dataclass
class TrainHistory:
    """Per-epoch loss curves; ``val`` is empty when no held-out pairs."""

    train: list[float] = field(default_factory=list)
    val: list[float] = field(default_factory=list)


class FdmModel:
    """Parameter container plus the layer graph for one config."""

    def __init__(self, config: FdmConfig, store: ParamStore | None = None, init_seed: int | None = None):
        self.config = config
        self.store = store if store is not None else ParamStore()
        rng = make_rng(config.seed if init_seed is None else init_seed, index=1)
        h0, w0 = config.seed_shape
        base = config.base_channels
        self.input = Dense(
            self.store, "input", config.embed_dim + config.noise_dim, h0 * w0 * base, rng
        )
        self.blocks = [
            ResidualBlock(self.store, f"up{i}", base, base, rng) for i in range(STAGES)
        ]
        self.out = Conv2d(self.store, "out", base, config.channels, rng)

    def logits(self, embeddings: Tensor, noise: Tensor) -> Tensor:
        """(B, embed_dim), (B, noise_dim) -> (B, C, H, W) pre-softmax scores."""
        cfg = self.config
        if embeddings.data.shape[1] != cfg.embed_dim:
            raise DataError(
                f"embedding dim {embeddings.data.shape[1]} != config {cfg.embed_dim}"
            )
        if noise.data.shape[1] != cfg.noise_dim:
            raise DataError(f"noise dim {noise.data.shape[1]} != config {cfg.noise_dim}")
        batch = embeddings.data.shape[0]
        h0, w0 = cfg.seed_shape
        # Corpus embeddings are unit-norm, so each component sits near
        # 1/sqrt(dim) while noise components are N(0,1).  Rescaling the
        # embedding to unit component variance keeps the conditioning
        # signal from being drowned by the noise channels; without it the
        # optimizer collapses to an input-independent mean predictor.
        emb = mul(embeddings, float(np.sqrt(cfg.embed_dim)))
        x = self.input(concat([emb, noise], axis=1))
        x = reshape(x, (batch, cfg.base_channels, h0, w0))
        for block in self.blocks:
            x = upsample_nearest2(block(x))
        return self.out(x)

    def probabilities(self, embeddings: Tensor, noise: Tensor) -> Tensor:
        return softmax(self.logits(embeddings, noise), axis=1)


def fdm_forward(model: FdmModel, embedding: np.ndarray, noise: np.ndarray) -> ProbMap:
    """Single-example forward pass returning a per-cell tile distribution."""
    emb = Tensor(np.asarray(embedding, dtype=np.float32)[None, :])
    z = Tensor(np.asarray(noise, dtype=np.float32)[None, :])
    probs = model.probabilities(emb, z).data[0].transpose(1, 2, 0)
    # float32 softmax sums drift a few ulps from 1; renormalize for the
    # simplex check on ProbMap.
    probs = probs / probs.sum(axis=2, keepdims=True)
    return ProbMap(probs)


def _stack_pairs(pairs, config: FdmConfig):
    if not pairs:
        raise DataError("training needs at least one (embedding, target) pair")
    embs = np.stack([np.asarray(e, dtype=np.float32) for e, _ in pairs])
    targets = np.stack(
        [np.asarray(t, dtype=np.float32).transpose(2, 0, 1) for _, t in pairs]
    )
    if embs.shape[1] != config.embed_dim:
        raise DataError(f"embedding dim {embs.shape[1]} != config {config.embed_dim}")
    expected = (config.channels, config.height, config.width)
    if targets.shape[1:] != expected:
        raise DataError(f"target shape {targets.shape[1:]} != {expected}")
    return embs, targets


def _batch_loss(model: FdmModel, emb: Tensor, noise: Tensor, target: np.ndarray) -> Tensor:
    if model.config.loss == "cross_entropy":
        return cross_entropy_loss(model.logits(emb, noise), target, axis=1)
    return mse_loss(model.probabilities(emb, noise), target)


def fdm_train(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    config: FdmConfig,
    val_pairs: Sequence[tuple[np.ndarray, np.ndarray]] = (),
    progress: Callable[[int, float], None] | None = None,
) -> tuple[FdmModel, TrainHistory]:
    """Fit the model with Adam; fresh noise is drawn per example per epoch.

    ``pairs`` hold (embedding vector, one-hot map as H x W x C).  Returns the
    trained model and the per-epoch loss history.  Deterministic given the
    dataset order and ``config.seed``.
    """
    embs, targets = _stack_pairs(pairs, config)
    model = FdmModel(config)
    rng = make_rng(config.seed, index=2)
    history = TrainHistory()
    n = len(pairs)
    if val_pairs:
        val_embs, val_targets = _stack_pairs(val_pairs, config)
        # Fixed validation noise keeps the curve comparable across epochs.
        val_noise = make_rng(config.seed, index=3).normal(
            size=(len(val_pairs), config.noise_dim)
        ).astype(np.float32)
    for _ in range(config.epochs):
        noise = rng.normal(size=(n, config.noise_dim)).astype(np.float32)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss = _batch_loss(
                model, Tensor(embs[idx]), Tensor(noise[idx]), targets[idx]
            )
            model.store.zero_grad()
            loss.backward()
            model.store.adam_step(lr=config.lr)
            total += loss.item() * len(idx)
        history.train.append(total / n)
        if val_pairs:
            val_loss = _batch_loss(
                model, Tensor(val_embs), Tensor(val_noise), val_targets
            )
            history.val.append(val_loss.item())
        if progress is not None:
            progress(len(history.train), history.train[-1])
    return model, history


def fdm_generate(model: FdmModel, prompt: str, seed: int) -> MapGrid:
    """Embed a prompt, draw seeded noise, and decode the most likely tiles."""
    embedding = hashed_embed(prompt, model.config.embed_dim)
    noise = make_rng(seed, index=4).normal(size=model.config.noise_dim)
    return argmax_decode(fdm_forward(model, embedding, noise))


def save_fdm(path, model: FdmModel) -> None:
    cfg = model.config
    config = {
        "kind": "fdm",
        "embed_dim": cfg.embed_dim,
        "noise_dim": cfg.noise_dim,
        "base_channels": cfg.base_channels,
        "height": cfg.height,
        "width": cfg.width,
        "channels": cfg.channels,
        "lr": cfg.lr,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "loss": cfg.loss,
    }
    save_model(path, config, model.store.state_arrays())


def load_fdm(path) -> FdmModel:
    config, arrays = load_model(path)
    if config.get("kind") != "fdm":
        raise DataError(f"not a feed-forward model file: kind={config.get('kind')!r}")
    fields = {k: v for k, v in config.items() if k != "kind"}
    model = FdmModel(FdmConfig(**fields))
    model.store.load_arrays(arrays)
    return model
