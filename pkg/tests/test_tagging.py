from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fanref.tagging import (
    SENTINEL,
    AlignmentError,
    OverlapError,
    Span,
    TagLabel,
    TaggedComment,
    parse_tagged,
    read_tagged_jsonl,
    render_tagged,
    sentinel_ranges,
    write_tagged_jsonl,
)

SOLAR = "[SENT] Defense getting absolutely bullied by a dude that looks like he sells solar panels ."
SOLAR_TAGGED = "[SENT] [IN] getting absolutely bullied by [OUT] that looks like [OUT] sells solar panels ."


def solar_spans() -> list[Span]:
    return [
        Span(start=SOLAR.index("Defense"), end=SOLAR.index("Defense") + 7, label=TagLabel.IN),
        Span(start=SOLAR.index("a dude"), end=SOLAR.index("a dude") + 6, label=TagLabel.OUT),
        Span(start=SOLAR.index("he sells"), end=SOLAR.index("he sells") + 2, label=TagLabel.OUT),
    ]


def test_span_rejects_bad_offsets():
    with pytest.raises(ValueError):
        Span(start=5, end=5, label=TagLabel.IN)
    with pytest.raises(ValueError):
        Span(start=-1, end=3, label=TagLabel.IN)
    with pytest.raises(ValueError):
        Span(start=0, end=3, label=TagLabel.IN, confidence=6)


def test_render_replaces_spans_with_tag_tokens():
    tc = TaggedComment(comment_id="x", text=SOLAR, spans=solar_spans())
    assert render_tagged(tc) == SOLAR_TAGGED


def test_render_empty_span_list_is_identity():
    tc = TaggedComment(comment_id="x", text=SOLAR, spans=[])
    assert render_tagged(tc) == SOLAR


def test_render_implicit_span_replaces_sentinel():
    text = "[SENT] Need points but 7 would be HUGE momentum"
    tc = TaggedComment(
        comment_id="x",
        text=text,
        spans=[Span(start=0, end=6, label=TagLabel.IN, implicit=True)],
    )
    assert render_tagged(tc) == "[IN] Need points but 7 would be HUGE momentum"


def test_render_rejects_overlap():
    tc = TaggedComment(
        comment_id="x",
        text="hello world",
        spans=[
            Span(start=0, end=5, label=TagLabel.IN),
            Span(start=3, end=8, label=TagLabel.OUT),
        ],
    )
    with pytest.raises(OverlapError):
        render_tagged(tc)


def test_validate_rejects_explicit_span_crossing_sentinel():
    text = "[SENT] word"
    tc = TaggedComment(comment_id="x", text=text, spans=[Span(start=3, end=9, label=TagLabel.IN)])
    with pytest.raises(ValueError):
        tc.validate()


def test_validate_rejects_implicit_span_off_sentinel():
    text = "[SENT] word"
    tc = TaggedComment(
        comment_id="x", text=text, spans=[Span(start=7, end=11, label=TagLabel.IN, implicit=True)]
    )
    with pytest.raises(ValueError):
        tc.validate()


def test_parse_recovers_solar_panel_spans():
    spans = parse_tagged(SOLAR_TAGGED, SOLAR)
    expected = solar_spans()
    assert spans == expected
    surfaces = [SOLAR[s.start : s.end] for s in spans]
    assert surfaces == ["Defense", "a dude", "he"]


def test_parse_identity_when_untagged():
    assert parse_tagged(SOLAR, SOLAR) == []


def test_parse_degenerate_alignment_fails():
    with pytest.raises(AlignmentError):
        parse_tagged("[IN] [IN] [IN]", "hello world")


def test_parse_reports_divergence_offset():
    with pytest.raises(AlignmentError) as exc_info:
        parse_tagged("hello wurld", "hello world")
    assert exc_info.value.offset == 7


def test_parse_implicit_flag_set_on_sentinel():
    text = "[SENT] ok [SENT] sure"
    tagged = "[SENT] ok [IN] sure"
    spans = parse_tagged(tagged, text)
    assert len(spans) == 1
    assert spans[0].implicit
    assert (spans[0].start, spans[0].end) == (10, 16)


def test_parse_whitespace_tolerant_doubled_spaces():
    tagged = "[SENT]  [IN]  getting absolutely bullied by  [OUT] that looks like [OUT]  sells solar panels ."
    with pytest.raises(AlignmentError):
        parse_tagged(tagged, SOLAR)
    spans = parse_tagged(tagged, SOLAR, whitespace_tolerant=True)
    assert [SOLAR[s.start : s.end] for s in spans] == ["Defense", "a dude", "he"]


def test_parse_adjacent_tags_resolve_leftmost():
    original = "ab"
    spans = parse_tagged("[IN][OUT]", original)
    assert [(s.start, s.end) for s in spans] == [(0, 1), (1, 2)]


def test_round_trip_on_repeated_words():
    text = "go go go"
    tc = TaggedComment(comment_id="x", text=text, spans=[Span(start=3, end=5, label=TagLabel.IN)])
    assert parse_tagged(render_tagged(tc), text) == tc.spans


def test_sentinel_ranges():
    text = "[SENT] a [SENT] b"
    assert sentinel_ranges(text) == [(0, 6), (9, 15)]


def test_round_trip_with_non_bmp_characters():
    # Offsets count code points, matching the annotation UI's convention.
    text = "[SENT] that catch \U0001F3C8 was unreal \U0001F525 wow"
    start = text.index("unreal")
    tc = TaggedComment(
        comment_id="u",
        text=text,
        spans=[Span(start=start, end=start + 6, label=TagLabel.IN)],
    )
    rendered = render_tagged(tc)
    assert "\U0001F3C8" in rendered and "[IN]" in rendered
    assert parse_tagged(rendered, text) == tc.spans


def test_parse_tolerant_with_emoji_and_doubled_spaces():
    text = "[SENT] go \U0001F3C8 team now"
    tc = TaggedComment(
        comment_id="u2",
        text=text,
        spans=[Span(start=text.index("team"), end=text.index("team") + 4, label=TagLabel.OUT)],
    )
    fuzzed = render_tagged(tc).replace("[OUT]", "[OUT] ").replace(" [OUT]", "  [OUT]")
    spans = parse_tagged(fuzzed, text, whitespace_tolerant=True)
    assert spans == tc.spans


def test_jsonl_round_trip(tmp_path):
    tc = TaggedComment(
        comment_id="c9",
        text=SOLAR,
        spans=[Span(start=7, end=14, label=TagLabel.IN, confidence=4)],
    )
    path = tmp_path / "tagged.jsonl"
    write_tagged_jsonl([tc], path)
    loaded = read_tagged_jsonl(path)
    assert loaded["c9"] == tc
    raw = json.loads(path.read_text().strip())
    assert raw["spans"][0]["confidence"] == 4


# ---------------------------------------------------------------------------
# Randomized round-trip property

_WORDS = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliet", "kilo", "lima", "mike", "november", "oscar", "papa",
]


def random_tagged_comment(rng: random.Random) -> TaggedComment:
    """A valid TaggedComment over sentences of distinct words.

    Distinct tokens plus at least one free token between consecutive spans
    keep renders unambiguous (every inter-tag segment contains a unique
    word), so parsing must invert them exactly. Adjacent multi-word spans
    would render ambiguously and are legitimately unrecoverable.
    """
    n_sentences = rng.randint(1, 3)
    sentence_words: list[list[str]] = []
    counter = 0
    for _ in range(n_sentences):
        words = []
        for _ in range(rng.randint(1, 6)):
            words.append(f"{rng.choice(_WORDS)}{counter}")
            counter += 1
        sentence_words.append(words)
    text = " ".join(f"{SENTINEL} {' '.join(ws)}" for ws in sentence_words)

    # Token stream: (start, end, is_sentinel, sentence_index, word_index).
    tokens: list[tuple[int, int, bool, int, int]] = []
    offset = 0
    for si, ws in enumerate(sentence_words):
        tokens.append((offset, offset + len(SENTINEL), True, si, -1))
        offset += len(SENTINEL) + 1
        for wi, w in enumerate(ws):
            tokens.append((offset, offset + len(w), False, si, wi))
            offset += len(w) + 1
    assert offset - 1 == len(text)

    spans: list[Span] = []
    last_covered = -2  # token index of the last covered token
    i = 0
    while i < len(tokens):
        start, end, is_sentinel, si, _ = tokens[i]
        free_gap = i > last_covered + 1
        if is_sentinel:
            if free_gap and rng.random() < 0.15:
                spans.append(Span(start=start, end=end, label=rng.choice(list(TagLabel)), implicit=True))
                last_covered = i
            i += 1
            continue
        if free_gap and rng.random() < 0.35:
            words_left = sum(1 for t in tokens[i:] if not t[2] and t[3] == si)
            length = rng.randint(1, min(3, words_left))
            span_end = tokens[i + length - 1][1]
            spans.append(Span(start=start, end=span_end, label=rng.choice(list(TagLabel))))
            last_covered = i + length - 1
            i += length
        else:
            i += 1
    tc = TaggedComment(comment_id="r", text=text, spans=sorted(spans, key=lambda s: s.start))
    tc.validate()
    return tc


def test_randomized_round_trip_seeded():
    rng = random.Random(20240901)
    for _ in range(300):
        tc = random_tagged_comment(rng)
        rendered = render_tagged(tc)
        assert parse_tagged(rendered, tc.text) == tc.spans


@st.composite
def tagged_comments(draw):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_tagged_comment(random.Random(seed))


@given(tagged_comments())
@settings(max_examples=150, deadline=None)
def test_round_trip_property(tc: TaggedComment):
    assert parse_tagged(render_tagged(tc), tc.text) == tc.spans


@given(tagged_comments())
@settings(max_examples=100, deadline=None)
def test_render_preserves_text_outside_spans(tc: TaggedComment):
    rendered = render_tagged(tc)
    pos = 0
    out_pos = 0
    for span in tc.spans:
        chunk = tc.text[pos : span.start]
        assert rendered[out_pos : out_pos + len(chunk)] == chunk
        out_pos += len(chunk) + len(span.label.token)
        pos = span.end
    assert rendered[out_pos:] == tc.text[pos:]
