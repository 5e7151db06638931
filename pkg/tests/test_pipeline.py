"""Pipeline orchestration: manifest contents, determinism, failure paths."""

import hashlib
import json

import pytest

from mapsmith.errors import DataError, UsageError
from mapsmith.pipeline import ARTIFACTS, PipelineConfig, run_pipeline


def tiny_config(out_dir, **overrides):
    base = dict(
        out_dir=out_dir,
        count=6,
        seed=11,
        embed_dim=32,
        fdm_epochs=2,
        ddm_epochs=1,
        aligner_epochs=2,
        eval_samples=2,
        sample_steps=4,
    )
    base.update(overrides)
    return PipelineConfig(**base)


@pytest.fixture(scope="module")
def finished(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipe")
    manifest = run_pipeline(tiny_config(out))
    return out, manifest


def test_manifest_lists_eight_hashed_artifacts(finished):
    out, manifest = finished
    assert [a["path"] for a in manifest["artifacts"]] == list(ARTIFACTS)
    for entry in manifest["artifacts"]:
        data = (out / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]


def test_manifest_file_round_trips(finished):
    out, manifest = finished
    on_disk = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert on_disk == manifest
    assert on_disk["count"] == 6
    assert on_disk["seed"] == 11


def test_figures_and_tables_ride_alongside(finished):
    out, manifest = finished
    assert manifest["figures"], "expected at least one figure"
    assert manifest["tables"], "expected at least one table"
    for rel in manifest["figures"] + manifest["tables"]:
        assert (out / rel).stat().st_size > 0
    assert all(rel.startswith("figures/") for rel in manifest["figures"])
    assert all(rel.endswith(".csv") for rel in manifest["tables"])


def test_eval_report_covers_all_three_modes(finished):
    out, _ = finished
    report = json.loads((out / "eval_report.json").read_text(encoding="utf-8"))
    assert report["text"]["mode"] == "text"
    assert set(report["map"]) == {"fdm", "ddm"}
    assert set(report["scatter"]) == {"fdm", "ddm"}


def test_rerun_is_bit_identical(finished, tmp_path):
    _, manifest = finished
    again = run_pipeline(tiny_config(tmp_path / "pipe2"))
    assert [a["sha256"] for a in again["artifacts"]] == [
        a["sha256"] for a in manifest["artifacts"]
    ]


def test_out_dir_is_created_when_missing(tmp_path):
    nested = tmp_path / "a" / "b" / "pipe"
    run_pipeline(tiny_config(nested))
    assert (nested / "manifest.json").exists()


def test_too_small_corpus_is_rejected():
    with pytest.raises(DataError):
        PipelineConfig(out_dir="/tmp/unused", count=5)


def test_stage_failure_keeps_upstream_artifacts(tmp_path):
    out = tmp_path / "broken"
    events = []
    # dim 8 is below the embedder's floor, so the embed stage fails
    # after three stages have already written their files.
    with pytest.raises(UsageError):
        run_pipeline(tiny_config(out, embed_dim=8), log=lambda s, m: events.append((s, m)))
    assert (out / "maps.jsonl").exists()
    assert (out / "dataset.jsonl").exists()
    assert not (out / "embeds.bin").exists()
    assert not (out / "manifest.json").exists()
    assert ("embed", "start") in events
    assert any(s == "embed" and m.startswith("failed:") for s, m in events)
