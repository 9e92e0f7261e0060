"""Win-probability-grounded tagging and analysis of intergroup references."""

from .ingest import (
    GameRecord,
    GroundedComment,
    Play,
    RawComment,
    align_wp,
    build_parallel_corpus,
    filter_gametime,
    ingest_comments,
    segment_sentences,
)
from .lexicon import Lexicon, ReferentForm, classify_referent_form, lexicon_tag, merge_tags
from .prompts import (
    FewShotExample,
    ModelResponse,
    PromptCondition,
    WpMode,
    build_prompt,
    linguistic_wp,
    parse_model_output,
    temperature_for,
)
from .scoring import (
    AgreementTable,
    CreditAssignment,
    ScoreReport,
    bootstrap_compare,
    f1_report,
    fleiss_kappa,
    match_spans,
    pairwise_accuracy,
)
from .tagging import SENTINEL, Span, TagLabel, TaggedComment, parse_tagged, render_tagged

__version__ = "0.1.0"

__all__ = [
    "AgreementTable",
    "CreditAssignment",
    "FewShotExample",
    "GameRecord",
    "GroundedComment",
    "Lexicon",
    "ModelResponse",
    "Play",
    "PromptCondition",
    "RawComment",
    "ReferentForm",
    "SENTINEL",
    "ScoreReport",
    "Span",
    "TagLabel",
    "TaggedComment",
    "WpMode",
    "align_wp",
    "bootstrap_compare",
    "build_parallel_corpus",
    "build_prompt",
    "classify_referent_form",
    "f1_report",
    "filter_gametime",
    "fleiss_kappa",
    "ingest_comments",
    "lexicon_tag",
    "linguistic_wp",
    "match_spans",
    "merge_tags",
    "pairwise_accuracy",
    "parse_model_output",
    "parse_tagged",
    "render_tagged",
    "segment_sentences",
    "temperature_for",
]
