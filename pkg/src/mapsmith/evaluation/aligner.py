"""Map-text aligner: a small dual encoder trained contrastively.

The map branch runs three conv+pool stages over one-hot tile planes,
the text branch is one linear layer over hashed prompt embeddings, and
both project to the same dimension.  Rows are length-normalized, so
the pairwise similarity matrix holds cosines; a learned temperature
scales it before the symmetric cross-entropy that pulls matched pairs
together against the other pairs in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..embedding import hashed_embed
from ..errors import DataError
from ..nn import (
    Conv2d,
    Dense,
    ParamStore,
    Tensor,
    add,
    avgpool2,
    cross_entropy_loss,
    exp,
    l2_normalize,
    load_model,
    matmul,
    mul,
    reshape,
    save_model,
    silu,
    transpose2d,
)
from ..rng import make_rng
from ..tiles import TILE_COUNT, MapGrid, one_hot_encode

POOL_STAGES = 3


@dataclass
class AlignerConfig:
    embed_dim: int
    base_channels: int = 16
    proj_dim: int = 128
    height: int = 32
    width: int = 32
    channels: int = TILE_COUNT
    lr: float = 1e-3
    epochs: int = 60
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        factor = 2**POOL_STAGES
        if self.height % factor or self.width % factor:
            raise DataError(
                f"map dims must be divisible by {factor}, got {self.height}x{self.width}"
            )
        if min(self.embed_dim, self.base_channels, self.proj_dim, self.channels) < 1:
            raise DataError("aligner dimensions must be positive")
        if self.batch_size < 2:
            raise DataError("contrastive batches need at least 2 pairs")


@dataclass
class TrainHistory:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)


class Aligner:
    """Dual encoder with a learned softmax temperature."""

    def __init__(
        self,
        config: AlignerConfig,
        store: ParamStore | None = None,
        init_seed: int | None = None,
    ):
        self.config = config
        self.store = store if store is not None else ParamStore()
        rng = make_rng(config.seed if init_seed is None else init_seed, index=21)
        b = config.base_channels
        self.conv1 = Conv2d(self.store, "conv1", config.channels, b, rng)
        self.conv2 = Conv2d(self.store, "conv2", b, 2 * b, rng)
        self.conv3 = Conv2d(self.store, "conv3", 2 * b, 4 * b, rng)
        factor = 2**POOL_STAGES
        self.flat_dim = 4 * b * (config.height // factor) * (config.width // factor)
        self.map_proj = Dense(self.store, "map_proj", self.flat_dim, config.proj_dim, rng)
        self.text_proj = Dense(self.store, "text_proj", config.embed_dim, config.proj_dim, rng)
        # exp() keeps the scale positive; starting it at 10 makes the
        # in-batch softmax meaningfully peaked from the first step.
        self.temperature = self.store.add("temperature", np.float32(np.log(10.0)))

    def encode_maps(self, maps: Tensor) -> Tensor:
        """(N, C, H, W) one-hot planes to unit-norm (N, proj_dim) rows."""
        cfg = self.config
        expected = (cfg.channels, cfg.height, cfg.width)
        if maps.data.ndim != 4 or maps.data.shape[1:] != expected:
            raise DataError(f"expected (N, {cfg.channels}, {cfg.height}, {cfg.width}) maps, got {maps.data.shape}")
        h = avgpool2(silu(self.conv1(maps)))
        h = avgpool2(silu(self.conv2(h)))
        h = avgpool2(silu(self.conv3(h)))
        h = reshape(h, (maps.data.shape[0], self.flat_dim))
        return l2_normalize(self.map_proj(h), axis=1)

    def encode_texts(self, embeddings: Tensor) -> Tensor:
        """(N, embed_dim) rows to unit-norm (N, proj_dim) rows."""
        if embeddings.data.ndim != 2 or embeddings.data.shape[1] != self.config.embed_dim:
            raise DataError(
                f"expected (N, {self.config.embed_dim}) embeddings, got {embeddings.data.shape}"
            )
        return l2_normalize(self.text_proj(embeddings), axis=1)

    def logits(self, map_rows: Tensor, text_rows: Tensor) -> Tensor:
        return mul(matmul(map_rows, transpose2d(text_rows)), exp(self.temperature))


def _stack_pairs(pairs, config: AlignerConfig):
    embs = np.stack([np.asarray(e, dtype=np.float32) for e, _ in pairs])
    maps = np.stack(
        [np.asarray(m, dtype=np.float32).transpose(2, 0, 1) for _, m in pairs]
    )
    if embs.shape[1] != config.embed_dim:
        raise DataError(f"embedding dim {embs.shape[1]} != config {config.embed_dim}")
    expected = (config.channels, config.height, config.width)
    if maps.shape[1:] != expected:
        raise DataError(f"map shape {maps.shape[1:]} != {expected}")
    return embs, maps


def _batch_loss(model: Aligner, embs: np.ndarray, maps: np.ndarray) -> Tensor:
    """Symmetric cross-entropy: each map picks its text and vice versa."""
    map_rows = model.encode_maps(Tensor(maps))
    text_rows = model.encode_texts(Tensor(embs))
    logits = model.logits(map_rows, text_rows)
    eye = np.eye(len(maps), dtype=np.float32)
    both = add(cross_entropy_loss(logits, eye), cross_entropy_loss(transpose2d(logits), eye))
    return mul(both, 0.5)


def train_aligner(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    config: AlignerConfig,
    val_pairs: Sequence[tuple[np.ndarray, np.ndarray]] = (),
    progress: Callable[[int, float], None] | None = None,
) -> tuple[Aligner, TrainHistory]:
    """Fit the dual encoder with Adam over shuffled in-batch contrasts.

    ``pairs`` hold (embedding vector, one-hot map as H x W x C), the
    same layout the generator trainers use.  Deterministic given the
    pair order and ``config.seed``.
    """
    if len(pairs) < 2:
        raise DataError("contrastive training needs at least 2 pairs")
    embs, maps = _stack_pairs(pairs, config)
    model = Aligner(config)
    rng = make_rng(config.seed, index=22)
    history = TrainHistory()
    n = len(pairs)
    if val_pairs:
        if len(val_pairs) < 2:
            raise DataError("a validation split needs at least 2 pairs")
        val_embs, val_maps = _stack_pairs(val_pairs, config)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        counted = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            if len(idx) < 2:
                continue  # a singleton tail batch has no negatives to contrast
            loss = _batch_loss(model, embs[idx], maps[idx])
            model.store.zero_grad()
            loss.backward()
            model.store.adam_step(lr=config.lr)
            total += loss.item() * len(idx)
            counted += len(idx)
        history.train.append(total / counted)
        if val_pairs:
            history.val.append(_batch_loss(model, val_embs, val_maps).item())
        if progress is not None:
            progress(len(history.train), history.train[-1])
    return model, history


def encode_grids(model: Aligner, grids: Sequence[MapGrid]) -> np.ndarray:
    """Unit-norm projection rows for a batch of maps."""
    maps = np.stack([one_hot_encode(g).values.transpose(2, 0, 1) for g in grids])
    return model.encode_maps(Tensor(maps)).data


def encode_prompts(model: Aligner, prompts: Sequence[str]) -> np.ndarray:
    """Unit-norm projection rows for a batch of prompt strings."""
    embs = np.stack(
        [hashed_embed(p, model.config.embed_dim) for p in prompts]
    ).astype(np.float32)
    return model.encode_texts(Tensor(embs)).data


def align_score(model: Aligner, prompt: str, grid: MapGrid) -> float:
    """Cosine agreement between prompt and map, clamped into [0, 100]."""
    map_row = encode_grids(model, [grid])[0]
    text_row = encode_prompts(model, [prompt])[0]
    return 100.0 * max(float(map_row @ text_row), 0.0)


def retrieval_accuracy(model: Aligner, pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """Fraction of pairs whose own text outranks every other text in ``pairs``."""
    if len(pairs) < 2:
        raise DataError("retrieval needs at least 2 pairs to rank against")
    embs, maps = _stack_pairs(pairs, model.config)
    map_rows = model.encode_maps(Tensor(maps)).data
    text_rows = model.encode_texts(Tensor(embs)).data
    sims = map_rows @ text_rows.T
    return float((np.argmax(sims, axis=1) == np.arange(len(pairs))).mean())


def save_aligner(path, model: Aligner) -> None:
    cfg = model.config
    config = {
        "kind": "aligner",
        "embed_dim": cfg.embed_dim,
        "base_channels": cfg.base_channels,
        "proj_dim": cfg.proj_dim,
        "height": cfg.height,
        "width": cfg.width,
        "channels": cfg.channels,
        "lr": cfg.lr,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
    }
    save_model(path, config, model.store.state_arrays())


def load_aligner(path) -> Aligner:
    config, arrays = load_model(path)
    if config.get("kind") != "aligner":
        raise DataError(f"not an aligner file: kind={config.get('kind')!r}")
    fields = {k: v for k, v in config.items() if k != "kind"}
    model = Aligner(AlignerConfig(**fields))
    model.store.load_arrays(arrays)
    return model
