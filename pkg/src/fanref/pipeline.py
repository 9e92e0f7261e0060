"""End-to-end pipeline: ingest -> align -> tag -> score -> analyze.

Every stage reads the previous stage's file artifacts from the output
directory and writes its own under fixed names, so runs are inspectable,
diffable, and resumable. Identical config, inputs, and seed produce
byte-identical artifacts (with the offline mock endpoint for tagging).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import analysis as an
from .client import (
    BatchResult,
    ChatClient,
    EndpointConfig,
    HttpChatClient,
    MockTaggerClient,
    tag_batch,
)
from .ingest import (
    GroundedComment,
    RawComment,
    build_parallel_corpus,
    filter_gametime,
    ingest_comments,
    read_comments_jsonl,
    read_grounded_jsonl,
    read_plays_csv,
    read_thread_map,
    write_grounded_jsonl,
)
from .lexicon import Lexicon, lexicon_tag
from .prompts import PromptCondition, WpMode, load_few_shot
from .scoring import bootstrap_compare, f1_report, render_score_table
from .tagging import TaggedComment, read_tagged_jsonl, write_tagged_jsonl

log = logging.getLogger(__name__)

STAGES = ("ingest", "align", "tag", "score", "analyze")

ARTIFACTS = {
    "ingest": ("raw_comments.jsonl", "ingest_rejects.jsonl"),
    "align": ("grounded.jsonl", "filter_dropped.jsonl"),
    "tag": ("predictions.jsonl", "tag_errors.jsonl"),
    "score": ("score_report.json", "score_table.txt"),
    "analyze": ("windows.csv", "trends.csv", "density.csv"),
}


class PipelineError(RuntimeError):
    pass


@dataclass
class RunConfig:
    comments: Path
    thread_map: Path
    plays: Path
    lexicon: Path
    few_shot: Path
    out_dir: Path
    gold: Path | None = None
    endpoint: EndpointConfig | None = None
    mock_endpoint: bool = False
    condition: PromptCondition = field(default_factory=lambda: PromptCondition(WpMode.NUMERIC))
    parallelism: int = 1
    window_width: int = 5
    normalization: an.Normalization = an.Normalization.ALL_COMMENTS
    emit_both_normalizations: bool = False
    variables: tuple[str, ...] = ()
    bootstrap_iterations: int = 1000
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict, base: Path) -> "RunConfig":
        paths = d.get("paths", {})

        def path_of(key: str) -> Path:
            if key not in paths:
                raise PipelineError(f"config is missing paths.{key}")
            p = Path(paths[key])
            return p if p.is_absolute() else base / p
        gold = None
        if paths.get("gold"):
            g = Path(paths["gold"])
            gold = g if g.is_absolute() else base / g
        endpoint = EndpointConfig.from_dict(d["endpoint"]) if d.get("endpoint") else None
        cond = d.get("condition", {})
        analysis_cfg = d.get("analysis", {})
        boot = d.get("bootstrap", {})
        out = Path(paths.get("out_dir", "out"))
        return cls(
            comments=path_of("comments"),
            thread_map=path_of("thread_map"),
            plays=path_of("plays"),
            lexicon=path_of("lexicon"),
            few_shot=path_of("few_shot"),
            out_dir=out if out.is_absolute() else base / out,
            gold=gold,
            endpoint=endpoint,
            mock_endpoint=bool(d.get("mock_endpoint", False)),
            condition=PromptCondition(
                wp_mode=WpMode(cond.get("wp_mode", "numeric")),
                temperature_scaling=bool(cond.get("temperature_scaling", False)),
            ),
            parallelism=int(d.get("parallelism", 1)),
            window_width=int(analysis_cfg.get("window_width", 5)),
            normalization=an.Normalization(analysis_cfg.get("normalization", "all")),
            emit_both_normalizations=bool(analysis_cfg.get("emit_both_normalizations", False)),
            variables=tuple(analysis_cfg.get("variables", ())),
            bootstrap_iterations=int(boot.get("iterations", 1000)),
            seed=int(boot.get("seed", 0)),
        )

    def validate(self) -> None:
        for name in ("comments", "thread_map", "plays", "lexicon", "few_shot"):
            p: Path = getattr(self, name)
            if not p.exists():
                raise PipelineError(f"configured {name} path does not exist: {p}")
        if self.gold is not None and not self.gold.exists():
            raise PipelineError(f"configured gold path does not exist: {self.gold}")
        if self.window_width <= 0 or 100 % self.window_width != 0:
            raise PipelineError(f"window width must divide 100, got {self.window_width}")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        cfg = RunConfig.from_dict(json.load(f), base=path.parent)
    cfg.validate()
    return cfg


def _artifact(cfg: RunConfig, name: str) -> Path:
    return cfg.out_dir / name


def _stage_done(cfg: RunConfig, stage: str) -> bool:
    return all(_artifact(cfg, name).exists() for name in ARTIFACTS[stage])


def _require(cfg: RunConfig, stage: str, upstream: str) -> None:
    if not _stage_done(cfg, upstream):
        raise PipelineError(f'stage "{stage}" needs missing artifacts; run "{upstream}" first')


def _write_jsonl(records: Sequence[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def stage_ingest(cfg: RunConfig) -> None:
    records = read_comments_jsonl(cfg.comments)
    thread_map = read_thread_map(cfg.thread_map)
    comments, rejects = ingest_comments(records, thread_map)
    _write_jsonl(
        [
            {
                "id": c.id,
                "thread_id": c.thread_id,
                "team": c.team,
                "created_at": c.created_at,
                "body": c.body,
                "parent_id": c.parent_id,
                "parent_body": c.parent_body,
            }
            for c in comments
        ],
        _artifact(cfg, "raw_comments.jsonl"),
    )
    _write_jsonl(
        [{"record": r.record, "reason": r.reason} for r in rejects],
        _artifact(cfg, "ingest_rejects.jsonl"),
    )
    log.info("ingest: %d comments, %d rejects", len(comments), len(rejects))


def stage_align(cfg: RunConfig) -> None:
    _require(cfg, "align", "ingest")
    raw = []
    with open(_artifact(cfg, "raw_comments.jsonl"), encoding="utf-8") as f:
        for line in f:
            if line.strip():
                d = json.loads(line)
                raw.append(RawComment(**d))
    thread_map = read_thread_map(cfg.thread_map)
    games = read_plays_csv(cfg.plays)

    grounded: list[GroundedComment] = []
    dropped_rows: list[dict] = []
    by_game: dict[str, list] = {}
    for c in raw:
        game_id = thread_map[c.thread_id]["game_id"]
        by_game.setdefault(game_id, []).append(c)
    for game_id in sorted(by_game):
        if game_id not in games:
            raise PipelineError(f"no play data for game {game_id}")
        game = games[game_id]
        kept, dropped = filter_gametime(by_game[game_id], game)
        dropped_rows.extend(
            {"id": d.comment.id, "reason": d.reason, "created_at": d.comment.created_at}
            for d in dropped
        )
        home = [c for c in kept if c.team == game.home_team]
        away = [c for c in kept if c.team == game.away_team]
        grounded.extend(build_parallel_corpus(home, away, game))

    write_grounded_jsonl(grounded, _artifact(cfg, "grounded.jsonl"))
    _write_jsonl(dropped_rows, _artifact(cfg, "filter_dropped.jsonl"))
    log.info("align: %d grounded, %d dropped", len(grounded), len(dropped_rows))


def build_client(cfg: RunConfig) -> ChatClient:
    if cfg.mock_endpoint:
        return MockTaggerClient(Lexicon.load(cfg.lexicon))
    if cfg.endpoint is None:
        raise PipelineError("no endpoint configured; pass --mock-endpoint or set endpoint in config")
    return HttpChatClient(cfg.endpoint)


def stage_tag(cfg: RunConfig) -> None:
    _require(cfg, "tag", "align")
    grounded = read_grounded_jsonl(_artifact(cfg, "grounded.jsonl"))
    lexicon = Lexicon.load(cfg.lexicon)
    examples = load_few_shot(cfg.few_shot)
    client = build_client(cfg)
    retry = cfg.endpoint.retry if cfg.endpoint else None
    max_tokens = cfg.endpoint.max_tokens if cfg.endpoint else 512
    seed = cfg.endpoint.seed if cfg.endpoint else cfg.seed
    kwargs = {"retry": retry} if retry else {}
    result: BatchResult = tag_batch(
        grounded,
        cfg.condition,
        examples,
        client,
        parallelism=cfg.parallelism,
        max_tokens=max_tokens,
        seed=seed,
        journal_path=_artifact(cfg, "predictions.partial.jsonl"),
        **kwargs,
    )
    # Ensure-pass: lexicon matches fill anything the model left untagged.
    final: list[TaggedComment] = []
    for g in grounded:
        pred = result.predictions.get(g.id)
        if pred is None:
            continue
        spans = lexicon_tag(g, lexicon, pred.spans)
        final.append(TaggedComment(comment_id=g.id, text=g.segmented_body, spans=spans))
    final.sort(key=lambda tc: tc.comment_id)
    write_tagged_jsonl(final, _artifact(cfg, "predictions.jsonl"))
    _write_jsonl([e.to_dict() for e in result.errors], _artifact(cfg, "tag_errors.jsonl"))
    _artifact(cfg, "predictions.partial.jsonl").unlink(missing_ok=True)
    log.info("tag: %d predictions, %d errors", len(final), len(result.errors))


def stage_score(cfg: RunConfig) -> None:
    _require(cfg, "score", "tag")
    if cfg.gold is None:
        raise PipelineError("score stage needs a gold corpus; set paths.gold in config")
    gold = read_tagged_jsonl(cfg.gold)
    pred = read_tagged_jsonl(_artifact(cfg, "predictions.jsonl"))
    # Gold defines the evaluation set; extra predicted comments are ignored.
    pred = {cid: tc for cid, tc in pred.items() if cid in gold}
    parse_failures = 0
    errors_path = _artifact(cfg, "tag_errors.jsonl")
    if errors_path.exists():
        with open(errors_path, encoding="utf-8") as f:
            parse_failures = sum(
                1 for line in f if line.strip() and json.loads(line).get("stage") == "parse"
            )
    report = f1_report(gold, pred, parse_failures=parse_failures)
    with open(_artifact(cfg, "score_report.json"), "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    with open(_artifact(cfg, "score_table.txt"), "w", encoding="utf-8") as f:
        f.write(render_score_table({cfg.condition.name: report}))
    log.info("score: weighted macro-F1 %.4f", report.weighted_macro_f1)


def stage_analyze(cfg: RunConfig) -> None:
    _require(cfg, "analyze", "tag")
    grounded = read_grounded_jsonl(_artifact(cfg, "grounded.jsonl"))
    pred = read_tagged_jsonl(_artifact(cfg, "predictions.jsonl"))
    lexicon = Lexicon.load(cfg.lexicon)
    comments = [an.AnalysisComment.build(g, pred.get(g.id)) for g in grounded]
    variables = an.make_variables(lexicon)
    if cfg.variables:
        variables = {name: variables[name] for name in cfg.variables}
    density = an.comment_density(comments, width=cfg.window_width)

    def analyze_with(normalization: an.Normalization, prefix: str) -> int:
        series = an.window_stats(
            comments, width=cfg.window_width, variables=variables, normalization=normalization
        )
        fits = {}
        for name in series.variables:
            try:
                fits[name] = an.fit_trend(series, name)
            except ValueError as exc:
                log.warning("skipping trend fit for %s: %s", name, exc)
        an.export_report(series, fits, density, cfg.out_dir, prefix=prefix)
        return len(fits)

    n_fits = analyze_with(cfg.normalization, "")
    if cfg.emit_both_normalizations:
        other = (
            an.Normalization.REFERENCING_COMMENTS
            if cfg.normalization is an.Normalization.ALL_COMMENTS
            else an.Normalization.ALL_COMMENTS
        )
        analyze_with(other, f"{other.value}_")
    log.info("analyze: %d fits (normalization %s)", n_fits, cfg.normalization.value)


_STAGE_FUNCS = {
    "ingest": stage_ingest,
    "align": stage_align,
    "tag": stage_tag,
    "score": stage_score,
    "analyze": stage_analyze,
}


def run_pipeline(cfg: RunConfig, stages: Sequence[str] | None = None, force: bool = False) -> list[str]:
    """Run the requested stages in dependency order; returns stages executed.

    Completed stages (all artifacts present) are skipped unless forced.
    """
    cfg.validate()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    requested = set(stages) if stages else set(STAGES)
    unknown = requested - set(STAGES)
    if unknown:
        raise PipelineError(f"unknown stages: {sorted(unknown)}")
    executed: list[str] = []
    for stage in STAGES:
        if stage not in requested:
            continue
        if not force and _stage_done(cfg, stage):
            log.info("stage %s already complete; skipping (use force to re-run)", stage)
            continue
        _STAGE_FUNCS[stage](cfg)
        executed.append(stage)
    return executed


def compare_systems(
    cfg: RunConfig,
    predictions_a: Path,
    predictions_b: Path,
) -> dict:
    """Paired-bootstrap comparison of two prediction files against gold."""
    if cfg.gold is None:
        raise PipelineError("bootstrap comparison needs a gold corpus; set paths.gold in config")
    gold = read_tagged_jsonl(cfg.gold)
    a = read_tagged_jsonl(predictions_a)
    b = read_tagged_jsonl(predictions_b)
    result = bootstrap_compare(a, b, gold, iterations=cfg.bootstrap_iterations, seed=cfg.seed)
    return {
        "p_value": result.p_value,
        "mean_delta_macro_f1": result.mean_delta,
        "observed_delta_macro_f1": result.observed_delta,
        "iterations": result.iterations,
        "seed": result.seed,
    }
