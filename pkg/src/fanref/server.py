"""Annotation task service and annotation import/export.

Serves annotation tasks over three endpoints (GET /tasks, POST
/annotations, GET /progress) and appends validated annotation records to a
single-writer JSON-lines log. The served text is the source of truth for
offset validation; records whose offsets do not address it are rejected.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .ingest import GroundedComment
from .prompts import linguistic_wp
from .tagging import SENTINEL, Span, TagLabel, TaggedComment, sentinel_ranges, write_tagged_jsonl


@dataclass(frozen=True)
class AnnotationTask:
    comment_id: str
    text: str
    team: str
    opponent: str
    parent: str | None
    context: str

    def to_dict(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "text": self.text,
            "team": self.team,
            "opponent": self.opponent,
            "parent": self.parent,
            "context": self.context,
        }


def export_tasks(
    grounded: Iterable[GroundedComment],
    path: str | Path,
    context_mode: str = "linguistic",
) -> int:
    """Write an annotation task file from a grounded corpus.

    ``context_mode`` picks the live-context string: a linguistic WP
    description or the numeric percentage.
    """
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for g in grounded:
            if context_mode == "numeric":
                context = f"{g.team} win probability: {g.wp * 100.0:.1f}%"
            else:
                context = linguistic_wp(g.wp, g.team, g.opponent)
            task = AnnotationTask(
                comment_id=g.id,
                text=g.segmented_body,
                team=g.team,
                opponent=g.opponent,
                parent=g.parent_body,
                context=context,
            )
            f.write(json.dumps(task.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def load_tasks(path: str | Path) -> list[AnnotationTask]:
    tasks: list[AnnotationTask] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            tasks.append(
                AnnotationTask(
                    comment_id=str(d["comment_id"]),
                    text=d["text"],
                    team=d.get("team", ""),
                    opponent=d.get("opponent", ""),
                    parent=d.get("parent"),
                    context=d.get("context", ""),
                )
            )
    return tasks


class SpanModel(BaseModel):
    start: int
    end: int
    label: str
    implicit: bool = False
    confidence: int | None = Field(default=None, ge=1, le=5)


class AnnotationRecordModel(BaseModel):
    comment_id: str
    annotator: str
    spans: list[SpanModel]


def validate_record(record: AnnotationRecordModel, text: str) -> list[str]:
    """Validation messages for a record against the served text; empty = valid."""
    problems: list[str] = []
    valid_labels = {label.value for label in TagLabel}
    sentinels = sentinel_ranges(text)
    ordered = sorted(record.spans, key=lambda s: (s.start, s.end))
    for span in ordered:
        if span.label not in valid_labels:
            problems.append(f"unknown label {span.label!r}")
        if not (0 <= span.start < span.end <= len(text)):
            problems.append(f"span {span.start}..{span.end} outside text bounds 0..{len(text)}")
            continue
        covered = text[span.start : span.end]
        if span.implicit:
            if covered != SENTINEL:
                problems.append(f"implicit span {span.start}..{span.end} must cover a sentinel token")
        else:
            if any(span.start < e and s < span.end for s, e in sentinels):
                problems.append(f"explicit span {span.start}..{span.end} crosses a sentinel token")
    for a, b in zip(ordered, ordered[1:]):
        if a.end > b.start:
            problems.append(f"overlapping spans {a.start}..{a.end} and {b.start}..{b.end}")
    return problems


def create_app(task_file: str | Path, annotations_path: str | Path) -> FastAPI:
    """Build the annotation service around a task file and an append-only log."""
    tasks = load_tasks(task_file)
    by_id = {t.comment_id: t for t in tasks}
    annotations_path = Path(annotations_path)
    write_lock = threading.Lock()

    app = FastAPI(title="annotation service")

    @app.get("/tasks")
    def get_tasks() -> list[dict]:
        return [t.to_dict() for t in tasks]

    @app.post("/annotations")
    def post_annotation(record: AnnotationRecordModel) -> dict:
        task = by_id.get(record.comment_id)
        if task is None:
            raise HTTPException(status_code=404, detail=f"unknown comment_id {record.comment_id!r}")
        problems = validate_record(record, task.text)
        if problems:
            raise HTTPException(status_code=422, detail=problems)
        line = json.dumps(
            {
                "comment_id": record.comment_id,
                "annotator": record.annotator,
                "spans": [s.model_dump(exclude_none=True) for s in record.spans],
            },
            ensure_ascii=False,
        )
        with write_lock:
            with open(annotations_path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
        return {"status": "ok"}

    @app.get("/progress")
    def get_progress() -> dict:
        annotated: set[str] = set()
        records = 0
        if annotations_path.exists():
            with open(annotations_path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        records += 1
                        annotated.add(json.loads(line)["comment_id"])
        return {"tasks": len(tasks), "annotated": len(annotated), "records": records}

    return app


def import_annotations(
    annotations_path: str | Path,
    task_file: str | Path,
    outdir: str | Path,
) -> dict[str, Path]:
    """Convert the annotations log into per-annotator interchange files.

    The latest record per (annotator, comment) wins. Returns the written
    file per annotator id.
    """
    tasks = {t.comment_id: t for t in load_tasks(task_file)}
    latest: dict[tuple[str, str], dict] = {}
    with open(annotations_path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            latest[(d["annotator"], d["comment_id"])] = d

    by_annotator: dict[str, list[TaggedComment]] = {}
    for (annotator, comment_id), d in sorted(latest.items()):
        task = tasks.get(comment_id)
        if task is None:
            continue
        spans = [
            Span(
                start=int(s["start"]),
                end=int(s["end"]),
                label=TagLabel(s["label"]),
                implicit=bool(s.get("implicit", False)),
                confidence=s.get("confidence"),
            )
            for s in d.get("spans", [])
        ]
        spans.sort(key=lambda s: (s.start, s.end))
        by_annotator.setdefault(annotator, []).append(
            TaggedComment(comment_id=comment_id, text=task.text, spans=spans)
        )

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for annotator, comments in sorted(by_annotator.items()):
        path = outdir / f"annotator_{annotator}.jsonl"
        write_tagged_jsonl(sorted(comments, key=lambda tc: tc.comment_id), path)
        written[annotator] = path
    return written


def serve_annotation(task_file: str | Path, annotations_path: str | Path, host: str, port: int) -> None:
    """Run the annotation service until interrupted."""
    import uvicorn

    app = create_app(task_file, annotations_path)
    uvicorn.run(app, host=host, port=port)
