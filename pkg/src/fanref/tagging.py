"""Tag schema, span model, and tagged-text rendering/parsing.

Comments are exchanged in *segmented* form: the literal sentinel token
``[SENT]`` precedes every sentence. Explicit spans cover words or phrases
of the text; implicit spans cover exactly one sentinel token and mark a
sentence judged to refer to a group without an explicit mention.

Tag tokens in serialized tagged text are the literal strings ``[IN]``,
``[OUT]`` and ``[OTHER]``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

SENTINEL = "[SENT]"

_TAG_TOKEN_RE = re.compile(r"\[(IN|OUT|OTHER)\]")
_WS_RUN_RE = re.compile(r"\s+")


class TagLabel(str, Enum):
    """The closed set of intergroup tags."""

    IN = "IN"
    OUT = "OUT"
    OTHER = "OTHER"

    @property
    def token(self) -> str:
        return f"[{self.value}]"


class OverlapError(ValueError):
    """Raised when spans overlap where they must not."""


class AlignmentError(ValueError):
    """Tagged text could not be aligned against the original text.

    ``offset`` is the first offset in the original text where alignment
    diverged (best effort).
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class Span:
    """A labeled character span over a segmented comment body.

    ``start`` is inclusive, ``end`` exclusive. Implicit spans cover exactly
    one ``[SENT]`` token. ``confidence`` is an optional 1-5 rating.
    """

    start: int
    end: int
    label: TagLabel
    implicit: bool = False
    confidence: int | None = None

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span offsets ({self.start}, {self.end})")
        if self.confidence is not None and self.confidence not in range(1, 6):
            raise ValueError(f"confidence must be in 1..5, got {self.confidence}")

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end

    def to_dict(self) -> dict:
        d = {
            "start": self.start,
            "end": self.end,
            "label": self.label.value,
            "implicit": self.implicit,
        }
        if self.confidence is not None:
            d["confidence"] = self.confidence
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Span":
        return cls(
            start=int(d["start"]),
            end=int(d["end"]),
            label=TagLabel(d["label"]),
            implicit=bool(d.get("implicit", False)),
            confidence=d.get("confidence"),
        )


def sentinel_ranges(text: str) -> list[tuple[int, int]]:
    """Offset ranges of every sentinel token in ``text``."""
    return [(m.start(), m.end()) for m in re.finditer(re.escape(SENTINEL), text)]


@dataclass
class TaggedComment:
    """A segmented comment body plus its ordered, non-overlapping spans."""

    comment_id: str
    text: str
    spans: list[Span] = field(default_factory=list)

    def validate(self) -> None:
        """Raise if any span invariant is violated."""
        n = len(self.text)
        sentinels = sentinel_ranges(self.text)
        starts = [s.start for s in self.spans]
        if starts != sorted(starts):
            raise ValueError("spans not sorted by start offset")
        for a, b in zip(self.spans, self.spans[1:]):
            if a.end > b.start:
                raise OverlapError(f"overlap between {a.start}..{a.end} and {b.start}..{b.end}")
        for span in self.spans:
            if span.end > n:
                raise ValueError(f"span {span.start}..{span.end} beyond text length {n}")
            covered = self.text[span.start : span.end]
            if span.implicit:
                if covered != SENTINEL:
                    raise ValueError(
                        f"implicit span {span.start}..{span.end} does not cover a sentinel"
                    )
            else:
                for s, e in sentinels:
                    if span.start < e and s < span.end:
                        raise ValueError(
                            f"explicit span {span.start}..{span.end} crosses a sentinel"
                        )

    def to_dict(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "text": self.text,
            "spans": [s.to_dict() for s in self.spans],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaggedComment":
        return cls(
            comment_id=str(d["comment_id"]),
            text=d["text"],
            spans=[Span.from_dict(s) for s in d.get("spans", [])],
        )


def render_tagged(tagged: TaggedComment) -> str:
    """Replace every span's surface text by its tag token.

    Text outside spans (including untagged sentinels) is preserved
    byte-for-byte. Raises :class:`OverlapError` on overlapping spans.
    """
    tagged.validate()
    out: list[str] = []
    pos = 0
    for span in tagged.spans:
        out.append(tagged.text[pos : span.start])
        out.append(span.label.token)
        pos = span.end
    out.append(tagged.text[pos:])
    return "".join(out)


def _split_on_tags(tagged_text: str) -> tuple[list[str], list[TagLabel]]:
    """Split tagged text into literal segments and the tag labels between them."""
    parts = _TAG_TOKEN_RE.split(tagged_text)
    segments = parts[0::2]
    labels = [TagLabel(v) for v in parts[1::2]]
    return segments, labels


def _divergence_offset(segments: list[str], original: str) -> int:
    """Best-effort offset in ``original`` where alignment first fails."""
    pos = 0
    for i, seg in enumerate(segments):
        if i == 0:
            common = 0
            while common < len(seg) and common < len(original) and seg[common] == original[common]:
                common += 1
            if common < len(seg):
                return common
            pos = len(seg)
            continue
        if not seg:
            continue
        # The tag before this segment must cover at least one character.
        found = original.find(seg, pos + 1)
        if found < 0:
            return pos
        pos = found + len(seg)
    return pos


def _collapse_ws(text: str) -> tuple[str, list[int]]:
    """Collapse whitespace runs to single spaces; return text + index map.

    ``index_map[i]`` is the offset in the uncollapsed text of collapsed
    character ``i``; a trailing entry maps the end position.
    """
    out: list[str] = []
    index_map: list[int] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            out.append(" ")
            index_map.append(i)
            while i < n and text[i].isspace():
                i += 1
        else:
            out.append(text[i])
            index_map.append(i)
            i += 1
    index_map.append(n)
    return "".join(out), index_map


def parse_tagged(
    tagged_text: str,
    original: str,
    *,
    whitespace_tolerant: bool = False,
) -> list[Span]:
    """Recover spans from tagged text by aligning it against the original.

    Literal segments between tag tokens are matched against the original
    left to right; each tag token then covers the text between its
    neighbouring segments. Repeated identical segments resolve to the
    leftmost feasible placement. A tag aligned over a sentinel token yields
    an implicit span.

    With ``whitespace_tolerant`` the literal segments match modulo
    whitespace runs, which recovers outputs that doubled or dropped spaces
    around tag tokens.

    Raises :class:`AlignmentError` when no alignment exists.
    """
    segments, labels = _split_on_tags(tagged_text)
    if len(labels) > 64:
        # Degenerate model output; refuse before the backtracking matcher.
        raise AlignmentError(f"too many tag tokens ({len(labels)})", offset=0)
    if not labels:
        if tagged_text == original:
            return []
        if whitespace_tolerant and _WS_RUN_RE.sub(" ", tagged_text) == _WS_RUN_RE.sub(" ", original):
            return []
        raise AlignmentError(
            "tagged text has no tags and differs from original",
            offset=_divergence_offset([tagged_text], original),
        )

    if whitespace_tolerant:
        haystack, index_map = _collapse_ws(original)
        needles = [_collapse_ws(seg)[0] for seg in segments]
    else:
        haystack, index_map = original, list(range(len(original) + 1))
        needles = segments

    # Leftmost-feasible alignment via lazy regex groups (backtracking finds
    # a placement whenever one exists).
    pattern = "".join(
        re.escape(seg) + ("(.+?)" if i < len(labels) else "")
        for i, seg in enumerate(needles)
    )
    m = re.fullmatch(pattern, haystack, re.DOTALL)
    if m is None:
        raise AlignmentError(
            "tagged text does not align with original",
            offset=_divergence_offset(segments, original),
        )

    spans: list[Span] = []
    for i, label in enumerate(labels, start=1):
        start = index_map[m.start(i)]
        end = index_map[m.end(i)]
        covered = original[start:end]
        if whitespace_tolerant:
            # Trim boundary whitespace picked up by collapsed matching.
            lstripped = covered.lstrip()
            start += len(covered) - len(lstripped)
            stripped = lstripped.rstrip()
            end = start + len(stripped)
            covered = stripped
            if start >= end:
                raise AlignmentError("tag aligned over whitespace only", offset=start)
        spans.append(Span(start=start, end=end, label=label, implicit=covered == SENTINEL))
    return spans


def read_tagged_jsonl(path: str | Path) -> dict[str, TaggedComment]:
    """Load a TaggedComment interchange file keyed by comment id."""
    out: dict[str, TaggedComment] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            tc = TaggedComment.from_dict(json.loads(line))
            out[tc.comment_id] = tc
    return out


def write_tagged_jsonl(comments: Iterable[TaggedComment], path: str | Path) -> None:
    """Write TaggedComments as interchange JSON-lines."""
    with open(path, "w", encoding="utf-8") as f:
        for tc in comments:
            f.write(json.dumps(tc.to_dict(), ensure_ascii=False) + "\n")


def iter_surfaces(tc: TaggedComment) -> Iterator[str]:
    """Surface texts of explicit spans, in order."""
    for span in tc.spans:
        if not span.implicit:
            yield tc.text[span.start : span.end]
