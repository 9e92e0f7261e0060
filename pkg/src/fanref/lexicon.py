"""Lexicon-based tagging of team aliases and group pronouns.

The lexicon carries per-team alias sets (team names, nicknames, city names,
abbreviations) and three global lexeme sets: first-person-plural pronouns,
third-person-plural pronouns, and subset-of-team terms. Matching is
case-insensitive, on word boundaries, and strips a trailing possessive
apostrophe(+s) before lookup.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .tagging import Span, TagLabel, sentinel_ranges

DEFAULT_PRONOUNS_IN = ("we", "us", "our", "ours", "we're", "we've")
DEFAULT_PRONOUNS_THIRD = ("they", "them", "their", "theirs", "they're")
DEFAULT_SUBSET_TERMS = (
    "offense",
    "defense",
    "o-line",
    "d-line",
    "receivers",
    "coaching staff",
    "secondary",
    "special teams",
)

_POSSESSIVE_RE = re.compile(r"(?:['’]s?)$")


class ReferentForm(str, Enum):
    """How much of a group a referring expression denotes, smallest first."""

    PERSON = "PERSON"
    SUBSET = "SUBSET"
    TEAM = "TEAM"
    TEAM_PLUS_SUPPORTERS = "TEAM_PLUS_SUPPORTERS"
    IMPLICIT = "IMPLICIT"


def normalize_surface(surface: str) -> str:
    """Lowercase and strip a trailing possessive marker."""
    return _POSSESSIVE_RE.sub("", surface.strip().lower())


def _alias_pattern(aliases: Sequence[str]) -> re.Pattern[str]:
    # Longest alias first so e.g. "Kansas City" beats "Kansas"; internal
    # whitespace matches any whitespace run; an optional possessive suffix
    # is matched but excluded from the captured alias group.
    alts = sorted(set(aliases), key=len, reverse=True)
    body = "|".join(r"\s+".join(re.escape(w) for w in a.split()) for a in alts)
    return re.compile(
        rf"(?<![A-Za-z0-9_])({body})(?:['’]s?)?(?![A-Za-z0-9_])",
        re.IGNORECASE,
    )


@dataclass(frozen=True)
class TeamEntry:
    team_id: str
    name: str
    aliases: tuple[str, ...]


@dataclass
class Lexicon:
    """Immutable-after-load lexicon; safe to share across workers."""

    teams: dict[str, TeamEntry]
    pronouns_in: frozenset[str]
    pronouns_third: frozenset[str]
    subset_terms: frozenset[str]
    _team_patterns: dict[str, re.Pattern[str]] = field(default_factory=dict, repr=False)
    _pronoun_in_pattern: re.Pattern[str] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        pronoun_like = {p.lower() for p in self.pronouns_in | self.pronouns_third}
        seen: dict[str, str] = {}
        for entry in self.teams.values():
            aliases = {a.lower() for a in entry.aliases}
            clash = aliases & pronoun_like
            if clash:
                raise ValueError(f"team {entry.team_id} aliases collide with pronouns: {clash}")
            for alias in aliases:
                if alias in seen:
                    raise ValueError(
                        f"alias {alias!r} belongs to both {seen[alias]} and {entry.team_id}"
                    )
                seen[alias] = entry.team_id
            self._team_patterns[entry.team_id] = _alias_pattern(entry.aliases)
        if self.pronouns_in:
            self._pronoun_in_pattern = _alias_pattern(sorted(self.pronouns_in))

    @classmethod
    def from_dict(cls, d: dict) -> "Lexicon":
        teams = {}
        for team_id, spec in d.get("teams", {}).items():
            aliases = tuple(spec.get("aliases", ()))
            teams[team_id] = TeamEntry(team_id=team_id, name=spec.get("name", team_id), aliases=aliases)
        return cls(
            teams=teams,
            pronouns_in=frozenset(p.lower() for p in d.get("pronouns_in", DEFAULT_PRONOUNS_IN)),
            pronouns_third=frozenset(p.lower() for p in d.get("pronouns_third", DEFAULT_PRONOUNS_THIRD)),
            subset_terms=frozenset(t.lower() for t in d.get("subset_terms", DEFAULT_SUBSET_TERMS)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Lexicon":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def team_name(self, team_id: str) -> str:
        entry = self.teams.get(team_id)
        return entry.name if entry else team_id

    def is_team_alias(self, surface: str) -> bool:
        norm = normalize_surface(surface)
        for entry in self.teams.values():
            if any(norm == a.lower() for a in entry.aliases):
                return True
        return False


def _candidates(
    text: str,
    in_team: str,
    out_team: str,
    lexicon: Lexicon,
) -> list[tuple[int, int, TagLabel]]:
    cands: list[tuple[int, int, TagLabel]] = []
    for team_id, pattern in lexicon._team_patterns.items():
        if team_id == in_team:
            label = TagLabel.IN
        elif team_id == out_team:
            label = TagLabel.OUT
        else:
            label = TagLabel.OTHER
        for m in pattern.finditer(text):
            cands.append((m.start(1), m.end(1), label))
    if lexicon._pronoun_in_pattern is not None:
        for m in lexicon._pronoun_in_pattern.finditer(text):
            cands.append((m.start(1), m.end(1), TagLabel.IN))
    return cands


def lexicon_spans(
    text: str,
    in_team: str,
    out_team: str,
    lexicon: Lexicon,
    existing: Sequence[Span] = (),
) -> list[Span]:
    """Add lexicon matches to ``existing`` spans; returns the merged, sorted list.

    In-group team aliases tag IN, opponent aliases OUT, any other team's
    aliases OTHER, first-person-plural lexemes IN. Regions already covered
    by an existing span (and sentinel tokens) are never tagged.
    """
    blocked: list[tuple[int, int]] = [(s.start, s.end) for s in existing]
    blocked.extend(sentinel_ranges(text))

    def is_free(start: int, end: int) -> bool:
        return all(end <= b or e <= start for b, e in blocked)

    added: list[Span] = []
    # Leftmost first; at equal start prefer the longest match.
    for start, end, label in sorted(_candidates(text, in_team, out_team, lexicon), key=lambda c: (c[0], -c[1])):
        if is_free(start, end):
            added.append(Span(start=start, end=end, label=label))
            blocked.append((start, end))
    merged = sorted([*existing, *added], key=lambda s: (s.start, s.end))
    return merged


def lexicon_tag(comment, lexicon: Lexicon, existing: Sequence[Span] = ()) -> list[Span]:
    """Apply the lexicon pass to a grounded comment's segmented body."""
    return lexicon_spans(comment.segmented_body, comment.team, comment.opponent, lexicon, existing)


def classify_referent_form(span: Span, text: str, lexicon: Lexicon) -> ReferentForm:
    """Classify how much of the group a span's surface form denotes.

    Implicit spans are IMPLICIT; we/us forms are the widest reference
    (TEAM_PLUS_SUPPORTERS); they/them and team aliases denote the TEAM;
    subset terms denote a SUBSET; everything else is a PERSON.
    """
    if span.implicit:
        return ReferentForm.IMPLICIT
    norm = normalize_surface(text[span.start : span.end])
    if norm in lexicon.pronouns_in:
        return ReferentForm.TEAM_PLUS_SUPPORTERS
    if norm in lexicon.pronouns_third:
        return ReferentForm.TEAM
    if norm in lexicon.subset_terms:
        return ReferentForm.SUBSET
    if lexicon.is_team_alias(norm):
        return ReferentForm.TEAM
    return ReferentForm.PERSON


def merge_tags(model_spans: Sequence[Span], lexicon_spans: Sequence[Span]) -> list[Span]:
    """Union of both span lists with model spans winning on overlap."""
    kept = list(model_spans)
    for cand in lexicon_spans:
        if all(not cand.overlaps(m) for m in model_spans):
            kept.append(cand)
    return sorted(kept, key=lambda s: (s.start, s.end))
