"""Command-line interface orchestrating the pipeline and annotation service."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import click

from . import analysis as an
from .ingest import read_grounded_jsonl
from .pipeline import PipelineError, RunConfig, compare_systems, load_config, run_pipeline
from .scoring import build_agreement_table, f1_report, fleiss_kappa, pairwise_accuracy, render_score_table
from .server import export_tasks, import_annotations, serve_annotation
from .tagging import read_tagged_jsonl

log = logging.getLogger(__name__)


def _configure(config: str, out: str | None, seed: int | None, mock_endpoint: bool) -> RunConfig:
    cfg = load_config(config)
    if out:
        cfg.out_dir = Path(out)
    if seed is not None:
        cfg.seed = seed
    if mock_endpoint:
        cfg.mock_endpoint = True
    return cfg


common_options = [
    click.option("--config", required=True, type=click.Path(exists=True), help="Run configuration JSON."),
    click.option("--out", default=None, type=click.Path(), help="Override the output directory."),
    click.option("--force", is_flag=True, help="Re-run stages even when artifacts exist."),
    click.option("--seed", default=None, type=int, help="Override the configured seed."),
    click.option("--mock-endpoint", is_flag=True, help="Tag offline with the deterministic lexicon mock."),
]


def with_common_options(fn):
    for option in reversed(common_options):
        fn = option(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info logging.")
def main(verbose: bool) -> None:
    """Ground, tag, score, and analyze intergroup references in game comments."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _run_stages(stages: list[str], config: str, out: str | None, force: bool, seed: int | None, mock_endpoint: bool) -> None:
    cfg = _configure(config, out, seed, mock_endpoint)
    try:
        executed = run_pipeline(cfg, stages=stages, force=force)
    except PipelineError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"executed: {', '.join(executed) if executed else 'nothing (already complete)'}")


for stage_name, help_text in (
    ("ingest", "Validate raw comments against the thread map."),
    ("align", "Filter to game time and ground comments in win probability."),
    ("tag", "Tag the grounded corpus through the configured endpoint."),
    ("score", "Score predictions against the gold corpus."),
    ("analyze", "Window frequencies, fit trends, and export tables."),
):

    def _make(stage: str, text: str):
        @main.command(name=stage, help=text)
        @with_common_options
        def _cmd(config: str, out: str | None, force: bool, seed: int | None, mock_endpoint: bool) -> None:
            _run_stages([stage], config, out, force, seed, mock_endpoint)

        return _cmd

    _make(stage_name, help_text)


@main.command(name="run", help="Run all pipeline stages in dependency order.")
@with_common_options
@click.option("--stages", default=None, help="Comma-separated stage subset.")
def run_cmd(config: str, out: str | None, force: bool, seed: int | None, mock_endpoint: bool, stages: str | None) -> None:
    wanted = [s.strip() for s in stages.split(",")] if stages else ["ingest", "align", "tag", "score", "analyze"]
    _run_stages(wanted, config, out, force, seed, mock_endpoint)


@main.command(name="agree", help="Inter-annotator agreement over annotator corpora.")
@click.option("--annotations", "annotation_files", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--gold", default=None, type=click.Path(exists=True), help="Optional gold corpus for accuracy.")
@click.option("--output", default=None, type=click.Path(), help="Write the agreement report JSON here.")
def agree_cmd(annotation_files: tuple[str, ...], gold: str | None, output: str | None) -> None:
    from fanref.scoring import BadTableError

    corpora = [read_tagged_jsonl(p) for p in annotation_files]
    try:
        table = build_agreement_table(corpora)
        kappa = fleiss_kappa(table)
    except BadTableError as exc:
        raise click.ClickException(str(exc)) from exc
    report: dict = {
        "fleiss_kappa": kappa,
        "items": len(table.rows),
        "raters": table.n_raters,
    }
    if gold:
        gold_corpus = read_tagged_jsonl(gold)
        report["accuracy_vs_gold"] = {
            Path(p).stem: pairwise_accuracy(corpus, gold_corpus)
            for p, corpus in zip(annotation_files, corpora)
        }
    blob = json.dumps(report, indent=2, sort_keys=True)
    if output:
        Path(output).write_text(blob + "\n", encoding="utf-8")
    click.echo(blob)


@main.command(name="bootstrap", help="Paired bootstrap comparison of two prediction files.")
@with_common_options
@click.option("--system-a", required=True, type=click.Path(exists=True))
@click.option("--system-b", required=True, type=click.Path(exists=True))
def bootstrap_cmd(
    config: str,
    out: str | None,
    force: bool,
    seed: int | None,
    mock_endpoint: bool,
    system_a: str,
    system_b: str,
) -> None:
    cfg = _configure(config, out, seed, mock_endpoint)
    try:
        result = compare_systems(cfg, Path(system_a), Path(system_b))
    except PipelineError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@main.command(name="density", help="Comment density per win-probability window.")
@with_common_options
def density_cmd(config: str, out: str | None, force: bool, seed: int | None, mock_endpoint: bool) -> None:
    cfg = _configure(config, out, seed, mock_endpoint)
    grounded_path = cfg.out_dir / "grounded.jsonl"
    if not grounded_path.exists():
        raise click.ClickException('density needs the grounded corpus; run "align" first')
    grounded = read_grounded_jsonl(grounded_path)
    comments = [an.AnalysisComment.build(g, None) for g in grounded]
    bins = an.comment_density(comments, width=cfg.window_width)
    path = cfg.out_dir / "density.csv"
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["window_lower", "midpoint", "count"])
        for b in bins:
            writer.writerow([format(b.lower, ".6g"), format(b.midpoint, ".6g"), b.count])
    click.echo(f"wrote {path}")


@main.command(name="export-tasks", help="Write an annotation task file from the grounded corpus.")
@with_common_options
@click.option("--context", "context_mode", default="linguistic", type=click.Choice(["linguistic", "numeric"]))
@click.option("--output", default=None, type=click.Path())
def export_tasks_cmd(
    config: str,
    out: str | None,
    force: bool,
    seed: int | None,
    mock_endpoint: bool,
    context_mode: str,
    output: str | None,
) -> None:
    cfg = _configure(config, out, seed, mock_endpoint)
    grounded_path = cfg.out_dir / "grounded.jsonl"
    if not grounded_path.exists():
        raise click.ClickException('export-tasks needs the grounded corpus; run "align" first')
    grounded = read_grounded_jsonl(grounded_path)
    path = Path(output) if output else cfg.out_dir / "tasks.jsonl"
    count = export_tasks(grounded, path, context_mode=context_mode)
    click.echo(f"wrote {count} tasks to {path}")


@main.command(name="serve-annotation", help="Serve annotation tasks to the browser UI.")
@click.option("--tasks", "task_file", required=True, type=click.Path(exists=True))
@click.option("--annotations", default="annotations.jsonl", type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8400, type=int)
def serve_annotation_cmd(task_file: str, annotations: str, host: str, port: int) -> None:
    serve_annotation(task_file, annotations, host=host, port=port)


@main.command(name="import-annotations", help="Convert the annotations log into interchange files.")
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--tasks", "task_file", required=True, type=click.Path(exists=True))
@click.option("--output-dir", required=True, type=click.Path())
def import_annotations_cmd(annotations: str, task_file: str, output_dir: str) -> None:
    written = import_annotations(annotations, task_file, output_dir)
    for annotator, path in written.items():
        click.echo(f"{annotator}: {path}")


@main.command(name="score-files", help="Score a prediction file against a gold file.")
@click.option("--gold", required=True, type=click.Path(exists=True))
@click.option("--predictions", required=True, type=click.Path(exists=True))
@click.option("--name", default="system", help="Column name in the score table.")
def score_files_cmd(gold: str, predictions: str, name: str) -> None:
    report = f1_report(read_tagged_jsonl(gold), read_tagged_jsonl(predictions))
    click.echo(render_score_table({name: report}), nl=False)
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
