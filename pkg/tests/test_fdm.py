"""Feed-forward generator: shapes, determinism, and small training runs.

Full-size convergence checks live in the acceptance suite; these stay at
reduced width and 16x16 grids so the whole file runs in seconds.
"""

import numpy as np
import pytest

from mapsmith.dungeon import GenConfig, generate
from mapsmith.embedding import hashed_embed
from mapsmith.errors import DataError
from mapsmith.fdm import (
    FdmConfig,
    FdmModel,
    fdm_forward,
    fdm_generate,
    fdm_train,
    load_fdm,
    save_fdm,
)
from mapsmith.rng import make_rng
from mapsmith.tiles import TILE_COUNT, MapGrid, one_hot_encode


def _small_config(**kw):
    base = dict(
        embed_dim=32,
        base_channels=16,
        height=16,
        width=16,
        epochs=10,
        batch_size=4,
        lr=1e-3,
    )
    base.update(kw)
    return FdmConfig(**base)


def _small_grid(seed):
    rng = make_rng(seed, index=7)
    walkable = np.array([0, 5, 6, 7, 11], dtype=np.int8)
    cells = walkable[rng.integers(0, len(walkable), size=(16, 16))]
    cells[0, :] = 10
    cells[-1, :] = 10
    return MapGrid(cells)


def _pairs(count, embed_dim=32):
    out = []
    for i in range(count):
        emb = hashed_embed(f"terrain sample {i}", embed_dim)
        out.append((emb, one_hot_encode(_small_grid(i)).values))
    return out


def test_config_validation():
    with pytest.raises(DataError):
        FdmConfig(embed_dim=8, height=20)
    with pytest.raises(DataError):
        FdmConfig(embed_dim=0)
    with pytest.raises(DataError):
        FdmConfig(embed_dim=8, loss="hinge")
    assert _small_config().seed_shape == (2, 2)


def test_forward_shape_and_simplex():
    cfg = _small_config()
    model = FdmModel(cfg)
    emb = hashed_embed("mossy cave", 32)
    noise = make_rng(0).normal(size=16)
    pm = fdm_forward(model, emb, noise)
    assert pm.values.shape == (16, 16, TILE_COUNT)
    assert np.allclose(pm.values.sum(axis=2), 1.0, atol=1e-6)


def test_forward_deterministic_and_noise_sensitive():
    cfg = _small_config()
    model = FdmModel(cfg)
    emb = hashed_embed("mossy cave", 32)
    n1 = make_rng(1).normal(size=16)
    a = fdm_forward(model, emb, n1).values
    b = fdm_forward(model, emb, n1).values
    assert np.array_equal(a, b)
    n2 = make_rng(2).normal(size=16)
    c = fdm_forward(model, emb, n2).values
    assert not np.allclose(a, c)


def test_forward_dim_mismatch():
    model = FdmModel(_small_config())
    with pytest.raises(DataError):
        fdm_forward(model, np.zeros(33, dtype=np.float32), np.zeros(16, dtype=np.float32))
    with pytest.raises(DataError):
        fdm_forward(model, np.zeros(32, dtype=np.float32), np.zeros(5, dtype=np.float32))


def test_untrained_loss_near_uniform_baseline():
    # A fresh model's softmax is near uniform, so MSE against one-hot
    # sits by ((1-1/C)^2 + (C-1)/C^2)/C = 0.0663 for C=14.
    pairs = _pairs(4)
    cfg = _small_config(epochs=1, lr=0.0)
    _, history = fdm_train(pairs, cfg)
    assert 0.05 < history.train[0] < 0.09


def test_training_reduces_loss_and_tracks_validation():
    pairs = _pairs(8)
    cfg = _small_config(epochs=100, lr=3e-4, batch_size=8)
    model, history = fdm_train(pairs[:6], cfg, val_pairs=pairs[6:])
    assert len(history.train) == 100
    assert len(history.val) == 100
    assert history.train[-1] < history.train[0] * 0.8
    assert all(v > 0 for v in history.val)


def test_training_is_deterministic():
    pairs = _pairs(4)
    cfg = _small_config(epochs=5)
    m1, h1 = fdm_train(pairs, cfg)
    m2, h2 = fdm_train(pairs, cfg)
    assert h1.train == h2.train
    for name in m1.store.names():
        assert np.array_equal(m1.store[name].data, m2.store[name].data)


def test_loss_window_non_increasing():
    pairs = _pairs(6)
    cfg = _small_config(epochs=60, lr=3e-4, batch_size=6)
    _, history = fdm_train(pairs, cfg)
    early = float(np.mean(history.train[0:50]))
    later = float(np.mean(history.train[10:60]))
    assert later <= early * 1.05


def test_empty_dataset_rejected():
    with pytest.raises(DataError):
        fdm_train([], _small_config())


def test_single_pair_memorization_small():
    grid = _small_grid(3)
    pairs = [(hashed_embed("lone fungus chamber", 32), one_hot_encode(grid).values)]
    cfg = _small_config(epochs=400, batch_size=1, lr=1e-3)
    model, history = fdm_train(pairs, cfg)
    assert history.train[-1] < history.train[0] * 0.2
    noise = make_rng(0).normal(size=16)
    decoded = np.argmax(fdm_forward(model, pairs[0][0], noise).values, axis=2)
    assert (decoded == grid.cells).mean() >= 0.9


def test_cross_entropy_flag_trains():
    pairs = _pairs(4)
    cfg = _small_config(epochs=20, loss="cross_entropy", batch_size=4, lr=3e-4)
    _, history = fdm_train(pairs, cfg)
    # Near log(14) = 2.64 up to the spread of the fresh random logits.
    assert 2.0 < history.train[0] < 4.0
    assert history.train[-1] < history.train[0]


def test_generate_deterministic_and_valid():
    model = FdmModel(_small_config())
    g1 = fdm_generate(model, "a frozen hollow", seed=5)
    g2 = fdm_generate(model, "a frozen hollow", seed=5)
    assert np.array_equal(g1.cells, g2.cells)
    assert g1.cells.shape == (16, 16)
    g3 = fdm_generate(model, "a frozen hollow", seed=6)
    assert g3.cells.shape == (16, 16)


def test_save_load_round_trip(tmp_path):
    pairs = _pairs(2)
    cfg = _small_config(epochs=3)
    model, _ = fdm_train(pairs, cfg)
    path = tmp_path / "model.mshm"
    save_fdm(path, model)
    loaded = load_fdm(path)
    assert loaded.config == model.config
    a = fdm_generate(model, "same prompt", seed=1)
    b = fdm_generate(loaded, "same prompt", seed=1)
    assert np.array_equal(a.cells, b.cells)


def test_load_rejects_other_model_kinds(tmp_path):
    from mapsmith.nn.serialize import save_model

    path = tmp_path / "other.mshm"
    save_model(path, {"kind": "aligner"}, {"w": np.zeros((2, 2), dtype=np.float32)})
    with pytest.raises(DataError):
        load_fdm(path)


def test_trained_on_dungeon_maps_end_to_end():
    maps = [generate(GenConfig(seed=s, height=16, width=16)) for s in range(3)]
    pairs = [
        (hashed_embed(f"dungeon {i}", 32), one_hot_encode(m.grid).values)
        for i, m in enumerate(maps)
    ]
    cfg = _small_config(epochs=10, batch_size=3, lr=3e-4)
    model, history = fdm_train(pairs, cfg)
    assert history.train[-1] < history.train[0]
    grid = fdm_generate(model, "dungeon 0", seed=0)
    assert grid.cells.shape == (16, 16)
