from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from fanref.pipeline import (
    ARTIFACTS,
    PipelineError,
    RunConfig,
    compare_systems,
    load_config,
    run_pipeline,
)

CONFIG = Path(__file__).resolve().parent.parent / "data" / "minicorpus" / "config.json"


def configured(tmp_path: Path, **overrides) -> RunConfig:
    cfg = load_config(CONFIG)
    cfg.out_dir = tmp_path / "out"
    cfg.mock_endpoint = True
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def tree_digest(root: Path) -> dict[str, str]:
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.iterdir())
        if p.is_file()
    }


def test_ingest_stage_produces_artifacts(tmp_path):
    cfg = configured(tmp_path)
    executed = run_pipeline(cfg, stages=["ingest"])
    assert executed == ["ingest"]
    assert (cfg.out_dir / "raw_comments.jsonl").exists()
    rejects = (cfg.out_dir / "ingest_rejects.jsonl").read_text().strip().splitlines()
    assert len(rejects) == 2


def test_analyze_without_tag_artifacts_errors(tmp_path):
    cfg = configured(tmp_path)
    with pytest.raises(PipelineError, match='run "tag" first'):
        run_pipeline(cfg, stages=["analyze"])


def test_score_without_gold_errors(tmp_path):
    cfg = configured(tmp_path, gold=None)
    run_pipeline(cfg, stages=["ingest", "align", "tag"])
    with pytest.raises(PipelineError, match="gold"):
        run_pipeline(cfg, stages=["score"])


def test_unknown_stage_rejected(tmp_path):
    cfg = configured(tmp_path)
    with pytest.raises(PipelineError, match="unknown stages"):
        run_pipeline(cfg, stages=["frobnicate"])


def test_full_run_then_skip_then_force(tmp_path):
    cfg = configured(tmp_path)
    executed = run_pipeline(cfg)
    assert executed == ["ingest", "align", "tag", "score", "analyze"]
    for names in ARTIFACTS.values():
        for name in names:
            assert (cfg.out_dir / name).exists()

    assert run_pipeline(cfg) == []  # idempotent skip
    assert run_pipeline(cfg, stages=["score"], force=True) == ["score"]


def test_two_forced_runs_byte_identical(tmp_path):
    cfg1 = configured(tmp_path / "a")
    cfg2 = configured(tmp_path / "b")
    run_pipeline(cfg1)
    run_pipeline(cfg2)
    assert tree_digest(cfg1.out_dir) == tree_digest(cfg2.out_dir)


def test_grounded_corpus_contents(tmp_path):
    cfg = configured(tmp_path)
    run_pipeline(cfg, stages=["ingest", "align"])
    lines = (cfg.out_dir / "grounded.jsonl").read_text().strip().splitlines()
    assert len(lines) == 50
    rows = [json.loads(line) for line in lines]
    times = [r["created_at"] for r in rows]
    assert times == sorted(times)
    assert all(0.0 <= r["wp"] <= 1.0 for r in rows)
    assert all(r["segmented_body"].count("[SENT]") >= 1 for r in rows)
    teams = {r["team"] for r in rows}
    assert teams == {"PHI", "DAL"}
    # Complementary wp for simultaneous opposite-side comments.
    by_ts: dict[int, list[dict]] = {}
    for r in rows:
        by_ts.setdefault(r["created_at"], []).append(r)
    for group in by_ts.values():
        sides = {g["team"] for g in group}
        if sides == {"PHI", "DAL"}:
            phi = next(g for g in group if g["team"] == "PHI")
            dal = next(g for g in group if g["team"] == "DAL")
            assert phi["wp"] + dal["wp"] == pytest.approx(1.0, abs=2e-6)


def test_score_report_structure(tmp_path):
    cfg = configured(tmp_path)
    run_pipeline(cfg)
    report = json.loads((cfg.out_dir / "score_report.json").read_text())
    assert set(report["per_label"]) == {"IN", "OUT", "OTHER"}
    assert 0.0 <= report["weighted_macro_f1"] <= 1.0
    assert report["comments"] == 20
    table = (cfg.out_dir / "score_table.txt").read_text()
    assert "[IN]" in table and "Overall" in table


def test_compare_systems_identical(tmp_path):
    cfg = configured(tmp_path)
    run_pipeline(cfg)
    predictions = cfg.out_dir / "predictions.jsonl"
    result = compare_systems(cfg, predictions, predictions)
    assert result["p_value"] == 1.0
    assert result["mean_delta_macro_f1"] == 0.0


def test_emit_both_normalizations(tmp_path):
    cfg = configured(tmp_path, emit_both_normalizations=True)
    run_pipeline(cfg)
    assert (cfg.out_dir / "windows.csv").exists()
    assert (cfg.out_dir / "referencing_windows.csv").exists()
    assert (cfg.out_dir / "referencing_trends.csv").exists()
    # Same counts, different denominators.
    base = (cfg.out_dir / "windows.csv").read_text().splitlines()
    other = (cfg.out_dir / "referencing_windows.csv").read_text().splitlines()
    assert len(base) == len(other)


def test_config_validation_missing_path(tmp_path):
    cfg = configured(tmp_path)
    cfg.comments = tmp_path / "missing.jsonl"
    with pytest.raises(PipelineError, match="comments"):
        run_pipeline(cfg)


def test_config_validation_window_width(tmp_path):
    cfg = configured(tmp_path, window_width=7)
    with pytest.raises(PipelineError, match="window width"):
        run_pipeline(cfg)


def test_config_missing_path_key_is_clear(tmp_path):
    bad = tmp_path / "config.json"
    bad.write_text(json.dumps({"paths": {"comments": "x.jsonl"}}))
    with pytest.raises(PipelineError, match="paths.thread_map"):
        load_config(bad)


def test_load_config_resolves_relative_paths():
    cfg = load_config(CONFIG)
    assert cfg.comments.is_absolute()
    assert cfg.comments.exists()
    assert cfg.gold is not None and cfg.gold.exists()
    assert cfg.condition.temperature_scaling is True
    assert cfg.bootstrap_iterations == 200


def test_cli_end_to_end(tmp_path):
    from click.testing import CliRunner

    from fanref.cli import main

    runner = CliRunner()
    out = tmp_path / "cli_out"
    result = runner.invoke(
        main, ["run", "--config", str(CONFIG), "--out", str(out), "--mock-endpoint"]
    )
    assert result.exit_code == 0, result.output
    assert (out / "trends.csv").exists()

    again = runner.invoke(
        main, ["analyze", "--config", str(CONFIG), "--out", str(out)]
    )
    assert again.exit_code == 0
    assert "nothing" in again.output


def test_cli_stage_dependency_error(tmp_path):
    from click.testing import CliRunner

    from fanref.cli import main

    runner = CliRunner()
    result = runner.invoke(
        main, ["analyze", "--config", str(CONFIG), "--out", str(tmp_path / "empty")]
    )
    assert result.exit_code != 0
    assert 'run "align" first' in result.output or 'run "tag" first' in result.output
