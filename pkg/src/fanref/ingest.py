"""Comment ingestion, game-time filtering, sentence segmentation, WP alignment.

Raw comments arrive as JSON-lines dumps; play-by-play win probabilities
arrive as CSV. Each surviving comment is grounded in the in-group win
probability at its timestamp and its body is segmented with a ``[SENT]``
sentinel before every sentence.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .tagging import SENTINEL

log = logging.getLogger(__name__)

# Small list of abbreviations that never end a sentence.
DEFAULT_ABBREVIATIONS = frozenset(
    {"mr", "mrs", "ms", "dr", "prof", "st", "vs", "etc", "jr", "sr", "ft", "mt"}
)

_URL_ONLY_RE = re.compile(
    r"^(?:(?:https?://|www\.)\S+)(?:\s+(?:https?://|www\.)\S+)*$", re.IGNORECASE
)
_BOUNDARY_RE = re.compile(r"[.!?]+(?=\s+[0-9A-Za-z])")
_WORD_BEFORE_RE = re.compile(r"([A-Za-z]+)\s*$")


class EmptyTextError(ValueError):
    """Body is empty or whitespace-only."""


class AlignmentImpossibleError(ValueError):
    """A game without plays cannot ground comments."""


class TeamMismatchError(ValueError):
    """Comment team does not belong to the game it is mapped to."""


@dataclass(frozen=True)
class RawComment:
    id: str
    thread_id: str
    team: str
    created_at: int
    body: str
    parent_id: str | None = None
    parent_body: str | None = None


@dataclass(frozen=True)
class Play:
    game_id: str
    play_index: int
    ended_at: int
    home_wp: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.home_wp <= 1.0):
            raise ValueError(f"home_wp outside [0,1]: {self.home_wp}")


@dataclass
class GameRecord:
    game_id: str
    home_team: str
    away_team: str
    plays: list[Play]

    def __post_init__(self) -> None:
        if self.home_team == self.away_team:
            raise ValueError(f"home and away team identical: {self.home_team}")
        for a, b in zip(self.plays, self.plays[1:]):
            if b.play_index <= a.play_index:
                raise ValueError(f"play_index not increasing in game {self.game_id}")
            if b.ended_at < a.ended_at:
                raise ValueError(f"ended_at decreasing in game {self.game_id}")

    @classmethod
    def from_plays(cls, game_id: str, plays: Sequence[Play]) -> "GameRecord":
        """Build a game record, reading away/home teams from the game id.

        Play data carries no team columns; ids follow the nflFastR-style
        ``<season>_<week>_<away>_<home>`` convention.
        """
        parts = game_id.split("_")
        if len(parts) < 4:
            raise ValueError(f"cannot read teams from game id {game_id!r}")
        away, home = parts[-2], parts[-1]
        return cls(game_id=game_id, home_team=home, away_team=away, plays=sorted(plays, key=lambda p: p.play_index))


@dataclass(frozen=True)
class GroundedComment:
    id: str
    thread_id: str
    team: str
    created_at: int
    body: str
    opponent: str
    wp: float
    segmented_body: str
    parent_id: str | None = None
    parent_body: str | None = None


@dataclass(frozen=True)
class Reject:
    record: dict
    reason: str


@dataclass(frozen=True)
class Dropped:
    comment: RawComment
    reason: str


def ingest_comments(
    records: Iterable[dict],
    thread_map: dict[str, dict],
) -> tuple[list[RawComment], list[Reject]]:
    """Validate raw comment records against the thread map.

    Returns accepted comments plus a rejects report. Reason codes:
    ``unknown-thread``, ``bad-timestamp``, ``empty-body``, ``missing-field``.
    """
    comments: list[RawComment] = []
    rejects: list[Reject] = []
    for rec in records:
        cid = rec.get("id")
        thread_id = rec.get("thread_id")
        body = rec.get("body")
        if not cid or not thread_id or not isinstance(body, str):
            rejects.append(Reject(record=rec, reason="missing-field"))
            continue
        if thread_id not in thread_map:
            rejects.append(Reject(record=rec, reason="unknown-thread"))
            continue
        try:
            created_at = int(rec["created_utc"])
            if created_at <= 0:
                raise ValueError
        except (KeyError, TypeError, ValueError):
            rejects.append(Reject(record=rec, reason="bad-timestamp"))
            continue
        if not body.strip():
            rejects.append(Reject(record=rec, reason="empty-body"))
            continue
        comments.append(
            RawComment(
                id=str(cid),
                thread_id=str(thread_id),
                team=thread_map[thread_id]["team"],
                created_at=created_at,
                body=body,
                parent_id=rec.get("parent_id"),
                parent_body=rec.get("parent_body"),
            )
        )
    return comments, rejects


def is_url_only(body: str) -> bool:
    """True when the trimmed body is one or more URLs and nothing else."""
    return bool(_URL_ONLY_RE.match(body.strip()))


def filter_gametime(
    comments: Iterable[RawComment],
    game: GameRecord,
) -> tuple[list[RawComment], list[Dropped]]:
    """Keep comments inside the game window, dropping URL-only bodies.

    The window is inclusive at both ends: first play end <= t <= last play
    end. The kept/dropped lists partition the input.
    """
    if not game.plays:
        raise AlignmentImpossibleError(f"game {game.game_id} has no plays")
    start = game.plays[0].ended_at
    end = game.plays[-1].ended_at
    kept: list[RawComment] = []
    dropped: list[Dropped] = []
    for c in comments:
        if is_url_only(c.body):
            dropped.append(Dropped(comment=c, reason="url-only"))
        elif c.created_at < start:
            dropped.append(Dropped(comment=c, reason="pre-game"))
        elif c.created_at > end:
            dropped.append(Dropped(comment=c, reason="post-game"))
        else:
            kept.append(c)
    return kept, dropped


def split_sentences(body: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Rule-based sentence split on terminal punctuation.

    A boundary is a run of ``.!?`` followed by whitespace and a letter or
    digit, unless a lone period follows a known abbreviation.
    """
    text = body.strip()
    if not text:
        raise EmptyTextError("empty-text")
    boundaries: list[int] = []
    for m in _BOUNDARY_RE.finditer(text):
        if m.group(0) == ".":
            before = _WORD_BEFORE_RE.search(text[: m.start()])
            if before and before.group(1).lower() in abbreviations:
                continue
        boundaries.append(m.end())
    sentences: list[str] = []
    prev = 0
    for b in boundaries:
        sentences.append(text[prev:b].strip())
        prev = b
    last = text[prev:].strip()
    if last:
        sentences.append(last)
    return sentences


def segment_sentences(body: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> str:
    """Prefix every detected sentence with the ``[SENT]`` sentinel."""
    sentences = split_sentences(body, abbreviations)
    return " ".join(f"{SENTINEL} {s}" for s in sentences)


def strip_sentinels(segmented: str) -> str:
    """Inverse of segmentation modulo whitespace normalization."""
    return re.sub(r"\s+", " ", segmented.replace(SENTINEL, " ")).strip()


def wp_at(ts: int, game: GameRecord, side: Literal["home", "away"]) -> float:
    """Win probability for ``side`` at timestamp ``ts``.

    Piecewise-constant: the WP of the latest play with ended_at <= ts; a
    comment at the exact first play end takes that play's WP.
    """
    if not game.plays:
        raise AlignmentImpossibleError(f"game {game.game_id} has no plays")
    ends = [p.ended_at for p in game.plays]
    if ts < ends[0] or ts > ends[-1]:
        raise ValueError(f"timestamp {ts} outside game window [{ends[0]}, {ends[-1]}]")
    idx = bisect_right(ends, ts) - 1
    home = game.plays[idx].home_wp
    return home if side == "home" else 1.0 - home


def align_wp(comment: RawComment, game: GameRecord, side: Literal["home", "away"]) -> float:
    """Ground a comment in the win probability at its timestamp."""
    return wp_at(comment.created_at, game, side)


def build_parallel_corpus(
    home_comments: Iterable[RawComment],
    away_comments: Iterable[RawComment],
    game: GameRecord,
) -> list[GroundedComment]:
    """Ground both sides' comments in one corpus, sorted by timestamp."""
    home_comments = list(home_comments)
    away_comments = list(away_comments)
    if not home_comments:
        log.warning("game %s: no home-side comments", game.game_id)
    if not away_comments:
        log.warning("game %s: no away-side comments", game.game_id)
    grounded: list[GroundedComment] = []
    for side, comments in (("home", home_comments), ("away", away_comments)):
        expected = game.home_team if side == "home" else game.away_team
        opponent = game.away_team if side == "home" else game.home_team
        for c in comments:
            if c.team != expected:
                raise TeamMismatchError(
                    f"team-mismatch: comment {c.id} carries team {c.team}, expected {expected}"
                )
            grounded.append(
                GroundedComment(
                    id=c.id,
                    thread_id=c.thread_id,
                    team=c.team,
                    created_at=c.created_at,
                    body=c.body,
                    opponent=opponent,
                    wp=align_wp(c, game, side),  # type: ignore[arg-type]
                    segmented_body=segment_sentences(c.body),
                    parent_id=c.parent_id,
                    parent_body=c.parent_body,
                )
            )
    grounded.sort(key=lambda g: (g.created_at, g.id))
    return grounded


# ---------------------------------------------------------------------------
# External interfaces


def read_comments_jsonl(path: str | Path) -> list[dict]:
    records: list[dict] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def read_thread_map(path: str | Path) -> dict[str, dict]:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def read_plays_csv(path: str | Path) -> dict[str, GameRecord]:
    """Parse play-by-play CSV into per-game records.

    Rows with an empty home_wp are skipped with a warning.
    """
    by_game: dict[str, list[Play]] = {}
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            wp_raw = (row.get("home_wp") or "").strip()
            if not wp_raw:
                log.warning(
                    "skipping play %s/%s: empty home_wp", row.get("game_id"), row.get("play_index")
                )
                continue
            play = Play(
                game_id=row["game_id"],
                play_index=int(row["play_index"]),
                ended_at=int(row["ended_at_utc"]),
                home_wp=float(wp_raw),
            )
            by_game.setdefault(play.game_id, []).append(play)
    return {gid: GameRecord.from_plays(gid, plays) for gid, plays in sorted(by_game.items())}


def grounded_to_dict(g: GroundedComment) -> dict:
    return {
        "id": g.id,
        "thread_id": g.thread_id,
        "team": g.team,
        "created_at": g.created_at,
        "body": g.body,
        "parent_id": g.parent_id,
        "parent_body": g.parent_body,
        "opponent": g.opponent,
        "wp": g.wp,
        "segmented_body": g.segmented_body,
    }


def grounded_from_dict(d: dict) -> GroundedComment:
    return GroundedComment(
        id=str(d["id"]),
        thread_id=d["thread_id"],
        team=d["team"],
        created_at=int(d["created_at"]),
        body=d["body"],
        parent_id=d.get("parent_id"),
        parent_body=d.get("parent_body"),
        opponent=d["opponent"],
        wp=float(d["wp"]),
        segmented_body=d["segmented_body"],
    )


def write_grounded_jsonl(comments: Iterable[GroundedComment], path: str | Path) -> None:
    """Write grounded comments; wp serialized with six fractional digits."""
    with open(path, "w", encoding="utf-8") as f:
        for g in comments:
            d = grounded_to_dict(g)
            d["wp"] = "__WP__"
            line = json.dumps(d, ensure_ascii=False).replace('"__WP__"', format(g.wp, ".6f"))
            f.write(line + "\n")


def read_grounded_jsonl(path: str | Path) -> list[GroundedComment]:
    out: list[GroundedComment] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(grounded_from_dict(json.loads(line)))
    return out
