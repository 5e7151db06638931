import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapsmith.dungeon import GenConfig, generate
from mapsmith.embedding import hashed_embed
from mapsmith.errors import DataError, UsageError
from mapsmith.evaluation import (
    AlignerConfig,
    align_score,
    bleu,
    connectivity_report,
    corpus_eval,
    edit_distance,
    encode_grids,
    encode_prompts,
    first_as_reference,
    load_aligner,
    meteor_lite,
    retrieval_accuracy,
    rouge_l,
    save_aligner,
    text_report,
    train_aligner,
    write_csv,
    write_json,
)
from mapsmith.evaluation.figures import connectivity_figure, loss_figure, scatter_figure
from mapsmith.nn import save_model
from mapsmith.rng import make_rng
from mapsmith.tiles import MapGrid, Tile, one_hot_encode

from oracles import flood_components, walkable_cells

words = st.lists(st.sampled_from("a b c d e".split()), min_size=1, max_size=12)


# ---------------------------------------------------------------- text metrics


def test_bleu_identical_long_enough():
    text = "winding halls of stone and sand"
    assert bleu(text, [text]) == pytest.approx([100.0] * 4)


def test_bleu_brevity_penalty():
    scores = bleu("the cat", ["the cat sat"])
    expected = 100.0 * math.exp(1.0 - 3.0 / 2.0)
    assert scores[0] == pytest.approx(expected, abs=0.01)
    assert scores[0] == pytest.approx(60.65, abs=0.01)
    # Both unigrams and the single bigram match, so BLEU-2 keeps the
    # same value; there are no trigrams to score.
    assert scores[1] == pytest.approx(expected, abs=0.01)
    assert scores[2] == 0.0 and scores[3] == 0.0


def test_bleu_clips_repeated_ngrams():
    # "the" occurs once in the reference, so only one of seven counts.
    scores = bleu("the the the the the the the", ["the cat"])
    assert scores[0] == pytest.approx(100.0 / 7.0)


def test_bleu_clip_takes_best_reference_count():
    low = bleu("big big", ["big"])
    high = bleu("big big", ["big", "big big hall"])
    assert low[0] == pytest.approx(50.0)
    assert high[0] == pytest.approx(100.0)


def test_bleu_brevity_uses_closest_reference_length():
    # reference lengths 4 and 3; the closest to c=2 is 3
    scores = bleu("big cave", ["stone big cave hall", "big cave sat"])
    assert scores[0] == pytest.approx(100.0 * math.exp(1.0 - 3.0 / 2.0), abs=0.01)


def test_bleu_empty_cases():
    with pytest.raises(DataError):
        bleu("anything", [])
    assert bleu("", ["a b"]) == [0.0] * 4


@settings(max_examples=60, deadline=None)
@given(words, words)
def test_bleu_cumulative_nonincreasing(h, r):
    scores = bleu(" ".join(h), [" ".join(r)])
    for lo, hi in zip(scores[1:], scores[:-1]):
        assert lo <= hi + 1e-9
    assert all(0.0 <= s <= 100.0 for s in scores)


def test_rouge_worked_example():
    assert rouge_l("a b c d", "a c d") == pytest.approx(83.56, abs=0.01)


def test_rouge_identical_and_degenerate():
    assert rouge_l("deep blue lake", "deep blue lake") == pytest.approx(100.0)
    assert rouge_l("", "a b") == 0.0
    assert rouge_l("a b", "") == 0.0
    assert rouge_l("a b", "x y") == 0.0


def test_rouge_swap_symmetry_only_at_equal_length():
    assert rouge_l("a b c d", "a c d") != pytest.approx(rouge_l("a c d", "a b c d"))
    assert rouge_l("a b c x", "a b c y") == pytest.approx(rouge_l("a b c y", "a b c x"))


def test_meteor_identical_formula():
    for text, n in (("a b c", 3), ("v w x y z", 5)):
        assert meteor_lite(text, text) == pytest.approx(100.0 * (1.0 - 0.5 / n**3))


def test_meteor_stem_matching():
    assert meteor_lite("running", "run") > 0.0
    assert meteor_lite("flooded caves", "flood cave") > 0.0


def test_meteor_degenerate_zero():
    assert meteor_lite("a b", "x y") == 0.0
    assert meteor_lite("", "a") == 0.0
    assert meteor_lite("a", "") == 0.0


def test_meteor_chunk_penalty_orders():
    in_order = meteor_lite("a b c d", "a b c d")
    scrambled = meteor_lite("c d a b", "a b c d")
    assert scrambled < in_order
    assert scrambled == pytest.approx(100.0 * (1.0 - 0.5 * (2.0 / 4.0) ** 3))


def test_edit_distance_examples():
    assert edit_distance("", "abc") == 3
    assert edit_distance("kitten", "sitting") == 3
    assert edit_distance("same", "same") == 0


@settings(max_examples=60, deadline=None)
@given(st.text("abc", max_size=8), st.text("abc", max_size=8), st.text("abc", max_size=8))
def test_edit_distance_metric_axioms(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert edit_distance(a, a) == 0
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


def test_text_report_takes_best_reference():
    rep = text_report("a b c d", ["z z z", "a b c d"])
    assert rep.bleu == pytest.approx((100.0,) * 4)
    assert rep.rouge_l == pytest.approx(100.0)
    assert rep.meteor == pytest.approx(100.0 * (1.0 - 0.5 / 64.0))


# --------------------------------------------------------------- connectivity


def _two_blob_grid() -> MapGrid:
    cells = np.full((8, 8), int(Tile.NONE), dtype=np.int8)
    cells[0, 0:5] = int(Tile.GROUND)
    cells[1, 0:5] = int(Tile.GRASS)
    cells[6, 2:7] = int(Tile.SAND)
    return MapGrid(cells)


def test_connectivity_uniform_ground():
    rep = connectivity_report(MapGrid.filled(Tile.GROUND))
    assert (rep.components, rep.largest, rep.fragmentation) == (1, 1024, 0.0)


def test_connectivity_two_blobs():
    rep = connectivity_report(_two_blob_grid())
    assert rep.components == 2
    assert rep.largest == 10
    assert rep.fragmentation == pytest.approx(1.0 - 10.0 / 15.0)


def test_connectivity_no_walkable():
    rep = connectivity_report(MapGrid.filled(Tile.NONE, 8, 8))
    assert (rep.components, rep.largest, rep.fragmentation) == (0, 0, 0.0)
    rep = connectivity_report(MapGrid.filled(Tile.LAVA, 8, 8))
    assert rep.components == 0


def test_connectivity_matches_flood_fill_oracle():
    rng = make_rng(41)
    for _ in range(10):
        cells = rng.integers(0, 14, size=(12, 16)).astype(np.int8)
        rep = connectivity_report(MapGrid(cells))
        sizes = flood_components(walkable_cells(cells.tolist()))
        assert rep.components == len(sizes)
        assert rep.largest == (sizes[0] if sizes else 0)
        if sizes:
            assert 0.0 <= rep.fragmentation < 1.0


def test_generated_maps_are_single_component():
    for seed in (1, 7, 303):
        rep = connectivity_report(generate(GenConfig(seed=seed)).grid)
        assert rep.components == 1
        assert rep.fragmentation == 0.0


# -------------------------------------------------------------------- aligner


_TILE_WORDS = [
    ("ground", Tile.GROUND),
    ("sand", Tile.SAND),
    ("grass", Tile.GRASS),
    ("water", Tile.WATER),
    ("lava", Tile.LAVA),
    ("ice", Tile.ICE),
    ("bog", Tile.BOG),
    ("fungus", Tile.FUNGUS),
]


def _aligner_config(**overrides) -> AlignerConfig:
    base = dict(
        embed_dim=32, base_channels=8, height=16, width=16,
        batch_size=8, epochs=40, lr=1e-3, seed=3,
    )
    base.update(overrides)
    return AlignerConfig(**base)


def _toy_pairs(count=16, seed=99):
    """Maps dominated by one tile, captions naming it plus a patch tile."""
    rng = make_rng(seed)
    pairs, grids, prompts = [], [], []
    for i in range(count):
        name, tile = _TILE_WORDS[i % 8]
        patch_name, patch = _TILE_WORDS[(i + 3) % 8]
        cells = np.full((16, 16), int(tile), dtype=np.int8)
        cells[rng.random((16, 16)) < 0.2] = int(patch)
        prompt = f"a large {name} field with {patch_name} patches"
        grid = MapGrid(cells)
        pairs.append((hashed_embed(prompt, 32), one_hot_encode(grid).values))
        grids.append(grid)
        prompts.append(prompt)
    return pairs, grids, prompts


def test_aligner_config_validation():
    with pytest.raises(DataError):
        _aligner_config(height=20)  # not divisible by 8
    with pytest.raises(DataError):
        _aligner_config(batch_size=1)
    with pytest.raises(DataError):
        _aligner_config(proj_dim=0)


def test_aligner_pair_validation():
    pairs, _, _ = _toy_pairs(4)
    with pytest.raises(DataError):
        train_aligner(pairs[:1], _aligner_config())
    bad_emb = [(np.zeros(7, dtype=np.float32), p[1]) for p in pairs]
    with pytest.raises(DataError):
        train_aligner(bad_emb, _aligner_config())
    bad_map = [(p[0], np.zeros((4, 4, 14), dtype=np.float32)) for p in pairs]
    with pytest.raises(DataError):
        train_aligner(bad_map, _aligner_config())


def test_untrained_loss_near_ln_batch():
    pairs, _, _ = _toy_pairs(8)
    _, hist = train_aligner(pairs, _aligner_config(epochs=1, lr=0.0))
    assert abs(hist.train[0] - math.log(8)) < 0.8


def test_training_decreases_below_ln_batch():
    pairs, _, _ = _toy_pairs(16)
    model, hist = train_aligner(pairs[:12], _aligner_config(), val_pairs=pairs[12:])
    assert len(hist.train) == 40 and len(hist.val) == 40
    assert hist.train[-1] < 0.5 * hist.train[0]
    assert hist.train[-1] < math.log(8)
    assert hist.val[-1] < hist.val[0]


def test_training_deterministic():
    pairs, _, _ = _toy_pairs(8)
    cfg = _aligner_config(epochs=6)
    model_a, hist_a = train_aligner(pairs, cfg)
    model_b, hist_b = train_aligner(pairs, cfg)
    assert hist_a.train == hist_b.train
    for name in model_a.store.names():
        assert np.array_equal(model_a.store[name].data, model_b.store[name].data)
    _, hist_c = train_aligner(pairs, _aligner_config(epochs=6, seed=4))
    assert hist_a.train != hist_c.train


def test_retrieval_above_chance():
    pairs, _, _ = _toy_pairs(16)
    model, _ = train_aligner(pairs[:12], _aligner_config())
    assert retrieval_accuracy(model, pairs[:12]) > 1.0 / 8.0
    assert retrieval_accuracy(model, pairs[12:]) > 1.0 / 8.0
    with pytest.raises(DataError):
        retrieval_accuracy(model, pairs[:1])


def test_align_score_is_clamped_cosine():
    pairs, grids, prompts = _toy_pairs(8)
    model, _ = train_aligner(pairs, _aligner_config(epochs=2))
    rows = encode_grids(model, grids)
    texts = encode_prompts(model, prompts)
    assert np.allclose(np.linalg.norm(rows, axis=1), 1.0, atol=1e-5)
    assert np.allclose(np.linalg.norm(texts, axis=1), 1.0, atol=1e-5)
    cosines = [float(rows[i] @ texts[j]) for i in range(8) for j in range(8)]
    scores = [
        align_score(model, prompts[j], grids[i]) for i in range(8) for j in range(8)
    ]
    for cos, score in zip(cosines, scores):
        assert score == pytest.approx(100.0 * max(cos, 0.0), abs=1e-3)
    # an 8x8 grid of untrained-ish projections always has some negative cosine
    assert min(cosines) < 0.0
    assert min(scores) == 0.0


def test_trained_score_prefers_own_caption():
    pairs, grids, prompts = _toy_pairs(16)
    model, _ = train_aligner(pairs, _aligner_config(epochs=60))
    own = align_score(model, prompts[0], grids[0])
    shuffled = align_score(model, prompts[5], grids[0])
    assert own > shuffled


def test_align_score_ignores_trailing_whitespace():
    pairs, grids, prompts = _toy_pairs(4)
    model, _ = train_aligner(pairs, _aligner_config(epochs=1))
    assert align_score(model, prompts[0] + " \n\t", grids[0]) == align_score(
        model, prompts[0], grids[0]
    )


def test_aligner_save_load_roundtrip(tmp_path):
    pairs, grids, prompts = _toy_pairs(8)
    model, _ = train_aligner(pairs, _aligner_config(epochs=5))
    path = tmp_path / "aligner.mshm"
    save_aligner(path, model)
    loaded = load_aligner(path)
    assert loaded.config == model.config
    for prompt, grid in zip(prompts[:3], grids[:3]):
        assert align_score(loaded, prompt, grid) == pytest.approx(
            align_score(model, prompt, grid)
        )


def test_load_aligner_rejects_other_kinds(tmp_path):
    path = tmp_path / "other.mshm"
    save_model(path, {"kind": "fdm"}, {"w": np.zeros(3, dtype=np.float32)})
    with pytest.raises(DataError):
        load_aligner(path)


# -------------------------------------------------------------------- reports


def test_text_mode_identical_descriptions():
    report, rows = corpus_eval(
        "text", descriptions=["broad stone halls in the north"] * 5
    )
    assert report["count"] == 4
    assert report["bleu"][0] == pytest.approx(100.0)
    assert report["spice"] is None
    assert all(r["spice"] == "" for r in rows)


def test_text_mode_explicit_inputs():
    report, rows = corpus_eval(
        "text",
        hypotheses=["a flooded cave", "a sandy cave"],
        references=["a flooded cave full of fungus"],
    )
    assert report["mode"] == "text" and report["count"] == 2
    assert len(rows) == 2
    assert 0.0 <= report["bleu"][3] <= report["bleu"][0] <= 100.0


def test_first_as_reference_split():
    hyps, refs = first_as_reference(["r", "h1", "h2"])
    assert hyps == ["h1", "h2"] and refs == ["r"]
    with pytest.raises(DataError):
        first_as_reference(["only one"])


def test_map_mode_over_generated_corpus():
    grids = [generate(GenConfig(seed=s)).grid for s in (11, 12, 13)]
    report, rows = corpus_eval("map", grids=grids)
    assert report["components"]["mean"] == pytest.approx(1.0)
    assert report["fragmentation"]["mean"] == pytest.approx(0.0)
    assert len(rows) == 3
    assert "fragmentation" in report["metric_labels"]


def test_scatter_mode_rows():
    pairs, grids, prompts = _toy_pairs(8)
    model, _ = train_aligner(pairs, _aligner_config(epochs=5))
    entries = [(prompts[i], grids[i], grids[(i + 1) % 8]) for i in range(8)]
    report, rows = corpus_eval("scatter", aligner=model, entries=entries)
    assert len(rows) == 8
    score_cols = [k for k in rows[0] if k.endswith("_score")]
    assert score_cols == ["truth_score", "generated_score"]
    for row in rows:
        assert 0.0 <= row["truth_score"] <= 100.0
        assert 0.0 <= row["generated_score"] <= 100.0
    assert report["count"] == 8


def test_eval_mode_errors():
    with pytest.raises(DataError):
        corpus_eval("text", hypotheses=[], references=["x"])
    with pytest.raises(DataError):
        corpus_eval("map", grids=[])
    with pytest.raises(DataError):
        corpus_eval("scatter", aligner=None, entries=[])
    with pytest.raises(UsageError):
        corpus_eval("nope")
    with pytest.raises(UsageError):
        corpus_eval("text")
    with pytest.raises(UsageError):
        corpus_eval("map")


def test_write_json_and_csv(tmp_path):
    report, rows = corpus_eval("map", grids=[_two_blob_grid()])
    jpath = write_json(tmp_path / "report.json", report)
    cpath = write_csv(tmp_path / "rows.csv", rows)
    parsed = json.loads(jpath.read_text())
    assert parsed["mode"] == "map"
    with open(cpath, newline="") as fh:
        back = list(csv.DictReader(fh))
    assert len(back) == 1
    assert back[0]["components"] == "2"
    with pytest.raises(DataError):
        write_csv(tmp_path / "empty.csv", [])


# -------------------------------------------------------------------- figures


def test_figures_are_written(tmp_path):
    report, rows = corpus_eval("map", grids=[generate(GenConfig(seed=2)).grid])
    cpath = connectivity_figure(rows, tmp_path / "conn.png")
    pairs, grids, prompts = _toy_pairs(4)
    model, hist = train_aligner(pairs, _aligner_config(epochs=3), val_pairs=pairs[:2])
    entries = [(prompts[i], grids[i], grids[(i + 1) % 4]) for i in range(4)]
    _, srows = corpus_eval("scatter", aligner=model, entries=entries)
    spath = scatter_figure(srows, tmp_path / "scatter.png")
    lpath = loss_figure(hist, tmp_path / "loss.png")
    for path in (cpath, spath, lpath):
        assert path.exists()
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
