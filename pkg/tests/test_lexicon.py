from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fanref.lexicon import (
    Lexicon,
    ReferentForm,
    classify_referent_form,
    lexicon_tag,
    merge_tags,
    normalize_surface,
)
from fanref.tagging import Span, TagLabel

from conftest import make_grounded


@pytest.fixture(scope="module")
def wide_lexicon() -> Lexicon:
    return Lexicon.from_dict(
        {
            "teams": {
                "PIT": {"name": "Steelers", "aliases": ["Steelers", "Pittsburgh"]},
                "PHI": {"name": "Eagles", "aliases": ["Eagles", "Philly"]},
                "SF": {"name": "49ers", "aliases": ["49ers", "Niners"]},
                "JAX": {"name": "Jaguars", "aliases": ["Jaguars", "Jags"]},
                "ARI": {"name": "Cardinals", "aliases": ["Cardinals", "Cards"]},
                "LAR": {"name": "Rams", "aliases": ["Rams"]},
                "KC": {"name": "Chiefs", "aliases": ["Chiefs", "KC", "Kansas City"]},
                "LAC": {"name": "Chargers", "aliases": ["Chargers", "Bolts"]},
            }
        }
    )


def surfaces(text: str, spans) -> list[tuple[str, str]]:
    return [(text[s.start : s.end], s.label.value) for s in spans]


def test_we_tags_in_group(wide_lexicon):
    comment = make_grounded(body="How are we this shit on defense",
                            segmented="[SENT] How are we this shit on defense",
                            team="PIT", opponent="PHI")
    spans = lexicon_tag(comment, wide_lexicon)
    assert surfaces(comment.segmented_body, spans) == [("we", "IN")]


def test_other_team_aliases_tag_other(wide_lexicon):
    text = "[SENT] Cards and rams are gonna be in the post-season regardless"
    comment = make_grounded(segmented=text, team="SF", opponent="JAX")
    spans = lexicon_tag(comment, wide_lexicon)
    assert surfaces(text, spans) == [("Cards", "OTHER"), ("rams", "OTHER")]


def test_opponent_alias_tags_out(wide_lexicon):
    text = "[SENT] Suck it , KC !"
    comment = make_grounded(segmented=text, team="LAC", opponent="KC")
    spans = lexicon_tag(comment, wide_lexicon)
    assert surfaces(text, spans) == [("KC", "OUT")]


def test_own_alias_tags_in(wide_lexicon):
    text = "[SENT] Eagles looking sharp"
    comment = make_grounded(segmented=text, team="PHI", opponent="PIT")
    spans = lexicon_tag(comment, wide_lexicon)
    assert surfaces(text, spans) == [("Eagles", "IN")]


def test_case_insensitive_word_boundary(wide_lexicon):
    text = "[SENT] niners by a mile , NINERS forever"
    comment = make_grounded(segmented=text, team="SF", opponent="KC")
    spans = lexicon_tag(comment, wide_lexicon)
    assert surfaces(text, spans) == [("niners", "IN"), ("NINERS", "IN")]


def test_no_match_inside_words(wide_lexicon):
    # "Ramsey" must not match the Rams alias.
    text = "[SENT] Ramsey locked him up"
    comment = make_grounded(segmented=text, team="SF", opponent="KC")
    assert lexicon_tag(comment, wide_lexicon) == []


def test_possessive_alias_matches_without_suffix(wide_lexicon):
    text = "[SENT] Eagles' defense is mush"
    comment = make_grounded(segmented=text, team="PHI", opponent="KC")
    spans = lexicon_tag(comment, wide_lexicon)
    assert surfaces(text, spans) == [("Eagles", "IN")]


def test_multiword_alias(wide_lexicon):
    text = "[SENT] Kansas City has no answer"
    comment = make_grounded(segmented=text, team="LAC", opponent="KC")
    spans = lexicon_tag(comment, wide_lexicon)
    assert surfaces(text, spans) == [("Kansas City", "OUT")]


def test_contracted_pronoun_beats_prefix(wide_lexicon):
    text = "[SENT] we're winning this one"
    comment = make_grounded(segmented=text, team="PHI", opponent="KC")
    spans = lexicon_tag(comment, wide_lexicon)
    assert surfaces(text, spans) == [("we're", "IN")]


def test_existing_spans_block_lexicon(wide_lexicon):
    text = "[SENT] we believe in Philly"
    comment = make_grounded(segmented=text, team="PHI", opponent="KC")
    existing = [Span(start=7, end=9, label=TagLabel.OUT)]  # pre-tagged "we"
    spans = lexicon_tag(comment, wide_lexicon, existing)
    assert surfaces(text, spans) == [("we", "OUT"), ("Philly", "IN")]


def test_never_tags_sentinels(wide_lexicon):
    lex = Lexicon.from_dict(
        {"teams": {"SEN": {"name": "Sent", "aliases": ["SENT"]}}}
    )
    comment = make_grounded(segmented="[SENT] nothing here", team="SEN", opponent="X")
    assert lexicon_tag(comment, lex) == []


def test_idempotent(wide_lexicon):
    rng = random.Random(7)
    vocab = ["we", "us", "Eagles", "Philly", "Cards", "rams", "KC", "ball", "game",
             "refs", "endzone", "they", "Niners", "huge", "play"]
    for _ in range(200):
        words = [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
        text = "[SENT] " + " ".join(words)
        comment = make_grounded(segmented=text, team="PHI", opponent="KC")
        once = lexicon_tag(comment, wide_lexicon)
        twice = lexicon_tag(comment, wide_lexicon, once)
        assert twice == once
        for a, b in zip(once, once[1:]):
            assert a.end <= b.start


@given(
    st.lists(
        st.sampled_from(
            ["we", "us", "Eagles", "Philly", "Dallas", "Cowboys", "KC", "they",
             "refs", "49ers", "game", "[SENT]", "Packers'", "huge", "o-line"]
        ),
        min_size=1,
        max_size=15,
    )
)
@settings(max_examples=150, deadline=None)
def test_lexicon_spans_respect_sentinels_and_disjointness(lexicon_words):
    lexicon = Lexicon.from_dict(
        {
            "teams": {
                "PHI": {"name": "Eagles", "aliases": ["Eagles", "Philly"]},
                "DAL": {"name": "Cowboys", "aliases": ["Cowboys", "Dallas"]},
                "KC": {"name": "Chiefs", "aliases": ["Chiefs", "KC"]},
                "SF": {"name": "49ers", "aliases": ["49ers", "Niners"]},
                "GB": {"name": "Packers", "aliases": ["Packers"]},
            }
        }
    )
    text = "[SENT] " + " ".join(lexicon_words)
    comment = make_grounded(segmented=text, team="PHI", opponent="DAL")
    spans = lexicon_tag(comment, lexicon)
    from fanref.tagging import sentinel_ranges

    forbidden = sentinel_ranges(text)
    for span in spans:
        assert not any(span.start < e and s < span.end for s, e in forbidden)
    for a, b in zip(spans, spans[1:]):
        assert a.end <= b.start
    # Idempotency under the same lexicon.
    assert lexicon_tag(comment, lexicon, spans) == spans


def test_alias_pronoun_collision_rejected():
    with pytest.raises(ValueError):
        Lexicon.from_dict({"teams": {"WE": {"name": "We", "aliases": ["we"]}}})


def test_normalize_surface():
    assert normalize_surface("Packers'") == "packers"
    assert normalize_surface("Chiefs’s") == "chiefs"
    assert normalize_surface("  Eagles ") == "eagles"


# ---------------------------------------------------------------------------
# Referent form


def test_classify_we_is_team_plus_supporters(lexicon):
    text = "[SENT] How are we this shit on defense"
    span = Span(start=text.index("we"), end=text.index("we") + 2, label=TagLabel.IN)
    assert classify_referent_form(span, text, lexicon) == ReferentForm.TEAM_PLUS_SUPPORTERS


def test_classify_subset(lexicon):
    text = "[SENT] our o-line should start holding"
    start = text.index("o-line")
    span = Span(start=start, end=start + 6, label=TagLabel.IN)
    assert classify_referent_form(span, text, lexicon) == ReferentForm.SUBSET


def test_classify_person(lexicon):
    text = "[SENT] Maybe Tua can actually get some time to throw"
    start = text.index("Tua")
    span = Span(start=start, end=start + 3, label=TagLabel.IN)
    assert classify_referent_form(span, text, lexicon) == ReferentForm.PERSON


def test_classify_team_alias(lexicon):
    text = "[SENT] Cowboys fans are quiet"
    span = Span(start=7, end=14, label=TagLabel.OUT)
    assert classify_referent_form(span, text, lexicon) == ReferentForm.TEAM


def test_classify_third_person_team(lexicon):
    text = "[SENT] they keep blitzing"
    span = Span(start=7, end=11, label=TagLabel.OUT)
    assert classify_referent_form(span, text, lexicon) == ReferentForm.TEAM


def test_classify_implicit(lexicon):
    text = "[SENT] What a conservative play call"
    span = Span(start=0, end=6, label=TagLabel.IN, implicit=True)
    assert classify_referent_form(span, text, lexicon) == ReferentForm.IMPLICIT


def test_classify_total_over_random_spans(lexicon):
    rng = random.Random(11)
    text = "[SENT] we watched the Eagles offense torch their secondary near Dallas"
    words = [(m.start(), m.end()) for m in __import__("re").finditer(r"\S+", text)]
    for _ in range(100):
        start, end = rng.choice(words[1:])
        span = Span(start=start, end=end, label=rng.choice(list(TagLabel)))
        form = classify_referent_form(span, text, lexicon)
        assert isinstance(form, ReferentForm)
        assert form is not ReferentForm.IMPLICIT


# ---------------------------------------------------------------------------
# merge_tags


def brute_force_merge(model: list[Span], lex: list[Span]) -> list[Span]:
    kept = list(model)
    for cand in lex:
        if all(cand.end <= m.start or m.end <= cand.start for m in model):
            kept.append(cand)
    return sorted(kept, key=lambda s: (s.start, s.end))


def test_merge_disjoint_concatenates():
    model = [Span(start=0, end=3, label=TagLabel.IN)]
    lex = [Span(start=5, end=8, label=TagLabel.OUT)]
    assert merge_tags(model, lex) == sorted(model + lex, key=lambda s: s.start)


def test_merge_model_wins_on_containment():
    model = [Span(start=0, end=10, label=TagLabel.IN)]
    lex = [Span(start=2, end=5, label=TagLabel.OUT)]
    assert merge_tags(model, lex) == model


def test_merge_matches_brute_force_oracle():
    rng = random.Random(3)
    for _ in range(200):
        def random_spans(n: int) -> list[Span]:
            spans: list[Span] = []
            pos = 0
            for _ in range(n):
                pos += rng.randint(0, 4)
                length = rng.randint(1, 5)
                spans.append(Span(start=pos, end=pos + length, label=rng.choice(list(TagLabel))))
                pos += length
            return spans

        model = random_spans(rng.randint(0, 4))
        lex = random_spans(rng.randint(0, 4))
        assert merge_tags(model, lex) == brute_force_merge(model, lex)


def test_merge_five_span_fixture_with_two_conflicts():
    model = [
        Span(start=0, end=4, label=TagLabel.IN),
        Span(start=10, end=14, label=TagLabel.OUT),
    ]
    lex = [
        Span(start=2, end=6, label=TagLabel.OTHER),   # conflicts with model[0]
        Span(start=12, end=13, label=TagLabel.IN),    # conflicts with model[1]
        Span(start=20, end=25, label=TagLabel.OTHER),
    ]
    merged = merge_tags(model, lex)
    assert merged == brute_force_merge(model, lex)
    assert merged == sorted(model + [lex[2]], key=lambda s: s.start)
