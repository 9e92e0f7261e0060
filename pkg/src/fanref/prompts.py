"""Prompt assembly and output parsing for chat-completion tagging.

Three win-probability conditions are supported: the query carries WP as a
one-decimal percentage (NUMERIC), as a natural-language game-state
description (LINGUISTIC), or not at all (NONE). Temperature scaling, when
enabled, sets the decoding temperature to sin(pi * WP) so generation is
most exploratory when the game is most uncertain.
"""

from __future__ import annotations

import ast
import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .ingest import GroundedComment
from .tagging import (
    AlignmentError,
    Span,
    TaggedComment,
    iter_surfaces,
    parse_tagged,
    render_tagged,
)


class WpMode(str, Enum):
    NUMERIC = "numeric"
    NONE = "none"
    LINGUISTIC = "linguistic"


@dataclass(frozen=True)
class PromptCondition:
    wp_mode: WpMode
    temperature_scaling: bool = False

    @property
    def name(self) -> str:
        suffix = "+ts" if self.temperature_scaling else ""
        return f"{self.wp_mode.value}{suffix}"


ALL_CONDITIONS = tuple(
    PromptCondition(mode, ts) for mode in WpMode for ts in (False, True)
)


def linguistic_wp(
    wp: float,
    in_team: str,
    out_team: str,
    style: str = "outgroup-winning",
) -> str:
    """Render WP as one of five scalar game-state descriptions.

    Buckets on the in-group WP percentage are lower-inclusive:
    [0,25), [25,45), [45,55), [55,75), [75,100]. With the default style the
    two low buckets name the out-group as winning; style
    ``ingroup-losing`` words them as the in-group losing instead.
    """
    if not 0.0 <= wp <= 1.0:
        raise ValueError(f"wp outside [0,1]: {wp}")
    if style not in ("outgroup-winning", "ingroup-losing"):
        raise ValueError(f"unknown style {style!r}")
    pct = round(wp * 100.0, 6)  # wp is quantized upstream; undo float drift
    if pct < 25:
        if style == "outgroup-winning":
            return f"{out_team} is very likely to win."
        return f"{in_team} is very likely to lose."
    if pct < 45:
        if style == "outgroup-winning":
            return f"{out_team} is likely to win."
        return f"{in_team} is likely to lose."
    if pct < 55:
        return "Both teams are equally likely to win."
    if pct < 75:
        return f"{in_team} is likely to win."
    return f"{in_team} is very likely to win."


def temperature_for(wp: float, condition: PromptCondition) -> float:
    """Decoding temperature: sin(pi * wp) under scaling, otherwise 1.0."""
    if not condition.temperature_scaling:
        return 1.0
    # min() keeps the endpoints exact (sin(pi) would not return 0.0).
    return math.sin(math.pi * min(wp, 1.0 - wp))


@dataclass
class FewShotExample:
    """One worked example: comment, context, references, explanation, target."""

    comment: str
    parent: str | None
    in_group: str
    out_group: str
    wp: float | None
    live_score: str | None
    ref_expressions: list[str]
    explanation: str
    target: str
    explanation_wp: str | None = None

    def validate(self) -> None:
        spans = parse_tagged(self.target, self.comment)
        tc = TaggedComment(comment_id="example", text=self.comment, spans=spans)
        surfaces = list(iter_surfaces(tc))
        if surfaces != self.ref_expressions:
            raise ValueError(
                f"ref_expressions {self.ref_expressions!r} do not match target surfaces {surfaces!r}"
            )

    @classmethod
    def from_dict(cls, d: dict) -> "FewShotExample":
        return cls(
            comment=d["comment"],
            parent=d.get("parent"),
            in_group=d["in_group"],
            out_group=d["out_group"],
            wp=d.get("wp"),
            live_score=d.get("live_score"),
            ref_expressions=list(d.get("ref_expressions", [])),
            explanation=d["explanation"],
            target=d["target"],
            explanation_wp=d.get("explanation_wp"),
        )


def load_few_shot(path: str | Path) -> list[FewShotExample]:
    """Load and validate the few-shot example file (JSON array)."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    examples = [FewShotExample.from_dict(d) for d in raw]
    for ex in examples:
        ex.validate()
    return examples


_WP_DEFINITION = (
    " Win probability is the probability of the in-group winning the game at the time of"
    " the comment - if the win probability is high, the in-group team is probably doing"
    " well and going to win."
)

_INSTRUCTIONS = (
    "Tag references to entities as in-group ([IN]), out-group ([OUT]) or other ([OTHER])"
    " in live, online sports comments made during NFL games. The input is the comment,"
    " the parent comment (if the comment is a reply, else it will be 'None'), the"
    " in-group team the commenter supports and the out-group opponent team in that"
    " game.{wp_definition} Using knowledge of American football and contextual language"
    " understanding, identify words and phrases denoting entities (players, teams, city"
    " names, sub-groups within the team) that refer to the in-group ([IN] - the team the"
    " commenter supports), the out-group ([OUT] - the opponent) or other teams ([OTHER] -"
    " some other team in the NFL that is not the in-group or the opponent), with respect"
    " to the commenter. Return the list of words/phrases that are to be tagged"
    " (ref_expressions), an explanation reasoning over why these words and phrases in"
    " comment should be tagged and with what tag, and the target comment itself with the"
    " relevant words/phrases replaced with the respective tags ([IN], [OUT] or [OTHER])"
    " in your final output."
)

_SENT_INSTRUCTIONS = (
    "Each sentence in a comment is separated by a [SENT] token. Sometimes a sentence in"
    " the comment will be about the in/out/other group but not have an explicit"
    " word/phrase that refers to the group; In such cases, tag the [SENT] token for that"
    " sentence with the corresponding tag label."
)

_EXAMPLES_LEAD = (
    "Here are {n} examples, with ref_expressions being the list of words/phrases to be"
    " tagged from comment, explanation being a reasonable reason for why these"
    " words/phrases should be tagged with appropriate tags, and target being the correct"
    " tagged output for comment."
)

_NO_REFERENCE_LEAD = (
    "Some comments will have no explicit or implicit reference to the in-group,"
    " out-group, or other, or it could be extremely hard to disambiguate any references"
    " based on given information. In such cases, return target as a copy of comment,"
    ' justify this with the explanation, "No explicit or implicit references to tag.",'
    " and return [] for ref_expressions. Here is an example:"
)

_QUERY_LEAD = (
    "Now tag only the relevant words/phrases in the following comment as either in-group"
    " ([IN]), out-group ([OUT]), or other ([OTHER]), if any. First return the list of"
    " words to be tagged, then explain your reasoning as to why these words/phrases"
    " should be tagged from comment and with which tags, and finally return the tagged"
    " comment in that order."
)

NO_REFERENCE_EXPLANATION = "No explicit or implicit references to tag."


def _format_ref_list(refs: Sequence[str]) -> str:
    return "[" + ", ".join(f"'{r}'" for r in refs) + "]"


def _wp_line(wp: float | None, in_team: str, out_team: str, condition: PromptCondition) -> str | None:
    if condition.wp_mode is WpMode.NONE or wp is None:
        return None
    if condition.wp_mode is WpMode.NUMERIC:
        return f"win probability: {wp * 100.0:.1f}%"
    return f"win probability: {linguistic_wp(wp, in_team, out_team)}"


def _example_block(ex: FewShotExample, condition: PromptCondition, include_answer: bool = True) -> str:
    lines = [
        f"comment: {ex.comment}",
        f"parent comment: {ex.parent if ex.parent else 'None'}",
        f"in-group: {ex.in_group}",
        f"out-group: {ex.out_group}",
    ]
    wp_line = _wp_line(ex.wp, ex.in_group, ex.out_group, condition)
    if wp_line:
        lines.append(wp_line)
    if include_answer:
        lines.append(f"ref_expressions: {_format_ref_list(ex.ref_expressions)}")
        explanation = ex.explanation
        if condition.wp_mode is not WpMode.NONE and ex.explanation_wp:
            explanation = ex.explanation_wp
        lines.append(f"explanation: {explanation}")
        lines.append(f"target: {ex.target}")
    return "\n".join(lines)


def build_prompt(
    comment: GroundedComment,
    condition: PromptCondition,
    examples: Sequence[FewShotExample],
) -> str:
    """Assemble the full tagging prompt for one grounded comment.

    ``examples`` holds the worked examples; entries with an empty
    ref_expressions list are presented as the no-reference fallback.
    Identical inputs produce byte-identical prompts.
    """
    if not examples:
        raise ValueError("few-shot example set must be non-empty")
    worked = [ex for ex in examples if ex.target != ex.comment]
    no_ref = [ex for ex in examples if ex.target == ex.comment]

    wp_definition = "" if condition.wp_mode is WpMode.NONE else _WP_DEFINITION
    parts = [
        _INSTRUCTIONS.format(wp_definition=wp_definition),
        _SENT_INSTRUCTIONS,
        _EXAMPLES_LEAD.format(n=len(worked)),
    ]
    parts.extend(_example_block(ex, condition) for ex in worked)
    if no_ref:
        parts.append(_NO_REFERENCE_LEAD)
        parts.extend(_example_block(ex, condition) for ex in no_ref)
    parts.append(_QUERY_LEAD)

    query = [
        f"comment: {comment.segmented_body}",
        f"parent comment: {comment.parent_body if comment.parent_body else 'None'}",
        f"in-group: {comment.team}",
        f"out-group: {comment.opponent}",
    ]
    wp_line = _wp_line(comment.wp, comment.team, comment.opponent, condition)
    if wp_line:
        query.append(wp_line)
    query.append("ref_expressions:")
    parts.append("\n".join(query))
    return "\n\n".join(parts)


def build_explanation_prompt(
    comment: GroundedComment,
    tagged: TaggedComment,
    condition: PromptCondition,
    examples: Sequence[FewShotExample],
) -> str:
    """Prompt asking for the explanation of an already-tagged comment.

    The worked examples are re-ordered with the explanation last, and the
    query provides the gold target and reference list.
    """
    if not examples:
        raise ValueError("few-shot example set must be non-empty")
    wp_definition = "" if condition.wp_mode is WpMode.NONE else _WP_DEFINITION
    parts = [
        _INSTRUCTIONS.format(wp_definition=wp_definition),
        _SENT_INSTRUCTIONS,
        "Given the tagged target and the list of tagged words/phrases, write the"
        " explanation for why those words/phrases carry those tags. Here are some"
        " examples:",
    ]
    for ex in examples:
        lines = [
            f"comment: {ex.comment}",
            f"parent comment: {ex.parent if ex.parent else 'None'}",
            f"in-group: {ex.in_group}",
            f"out-group: {ex.out_group}",
        ]
        wp_line = _wp_line(ex.wp, ex.in_group, ex.out_group, condition)
        if wp_line:
            lines.append(wp_line)
        lines.append(f"ref_expressions: {_format_ref_list(ex.ref_expressions)}")
        lines.append(f"target: {ex.target}")
        explanation = ex.explanation
        if condition.wp_mode is not WpMode.NONE and ex.explanation_wp:
            explanation = ex.explanation_wp
        lines.append(f"explanation: {explanation}")
        parts.append("\n".join(lines))

    refs = [tagged.text[s.start : s.end] for s in tagged.spans if not s.implicit]
    query = [
        f"comment: {comment.segmented_body}",
        f"parent comment: {comment.parent_body if comment.parent_body else 'None'}",
        f"in-group: {comment.team}",
        f"out-group: {comment.opponent}",
    ]
    wp_line = _wp_line(comment.wp, comment.team, comment.opponent, condition)
    if wp_line:
        query.append(wp_line)
    query.append(f"ref_expressions: {_format_ref_list(refs)}")
    query.append(f"target: {render_tagged(tagged)}")
    query.append("explanation:")
    parts.append("\n".join(query))
    return "\n\n".join(parts)


# ---------------------------------------------------------------------------
# Model output parsing


STATUS_OK = "ok"
STATUS_NO_TARGET = "no-target"
STATUS_ALIGNMENT_FAILED = "alignment-failed"
STATUS_NO_REF_LIST = "no-ref-list"
STATUS_NO_EXPLANATION = "no-explanation"


@dataclass
class ModelResponse:
    raw: str
    ref_expressions: list[str] | None
    explanation: str | None
    target: str | None
    status: str
    spans: list[Span]


_EXPLANATION_LABEL_RE = re.compile(r"(?im)^\s*explanation\s*:\s*")
_TARGET_LABEL_RE = re.compile(r"(?im)^\s*target\s*:\s*")
_REF_LABEL_RE = re.compile(r"(?im)^\s*ref_expressions\s*:\s*")
_BRACKET_LIST_RE = re.compile(r"\[[^\[\]]*\]", re.DOTALL)
_QUOTED_RE = re.compile(r"'([^']*)'|\"([^\"]*)\"")


def _parse_ref_list(head: str) -> list[str] | None:
    matches = list(_REF_LABEL_RE.finditer(head))
    scope = head[matches[-1].end() :] if matches else head
    # Last bracket blob that looks like a list literal wins (an echoed
    # prompt may precede the real output); stray [SENT]/tag tokens from an
    # echoed comment never qualify.
    best: str | None = None
    for bm in _BRACKET_LIST_RE.finditer(scope):
        blob = bm.group(0)
        if blob.strip() == "[]" or _QUOTED_RE.search(blob):
            best = blob
    if best is None:
        return None
    try:
        value = ast.literal_eval(best)
        if isinstance(value, (list, tuple)):
            return [str(v) for v in value]
    except (ValueError, SyntaxError):
        pass
    return [a or b for a, b in _QUOTED_RE.findall(best)]


def parse_model_output(raw: str, original: str) -> ModelResponse:
    """Extract the reference list, explanation, and tagged target.

    Section labels are matched case-insensitively; when a section label
    repeats (echoed prompt), the last occurrence is the output. The target
    is aligned against the original text to recover spans, retrying with
    whitespace-tolerant alignment before giving up.
    """
    target_matches = list(_TARGET_LABEL_RE.finditer(raw))
    tm = target_matches[-1] if target_matches else None
    target = raw[tm.end() :].strip() if tm else None

    before_target = raw[: tm.start()] if tm else raw
    explanation_matches = list(_EXPLANATION_LABEL_RE.finditer(before_target))
    em = explanation_matches[-1] if explanation_matches else None
    explanation = before_target[em.end() :].strip() if em else None

    head = before_target[: em.start()] if em else before_target
    refs = _parse_ref_list(head)

    if target is None:
        return ModelResponse(
            raw=raw,
            ref_expressions=refs,
            explanation=explanation,
            target=None,
            status=STATUS_NO_TARGET,
            spans=[],
        )

    try:
        spans = parse_tagged(target, original)
    except AlignmentError:
        try:
            spans = parse_tagged(target, original, whitespace_tolerant=True)
        except AlignmentError:
            return ModelResponse(
                raw=raw,
                ref_expressions=refs,
                explanation=explanation,
                target=target,
                status=STATUS_ALIGNMENT_FAILED,
                spans=[],
            )

    if refs is None:
        status = STATUS_NO_REF_LIST
    elif explanation is None:
        status = STATUS_NO_EXPLANATION
    else:
        status = STATUS_OK
    return ModelResponse(
        raw=raw,
        ref_expressions=refs,
        explanation=explanation,
        target=target,
        status=status,
        spans=spans,
    )
