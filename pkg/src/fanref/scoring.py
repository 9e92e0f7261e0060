"""Partial-credit span scoring, agreement statistics, and bootstrap comparison.

A predicted span earns full credit (1.0) for exactly matching a gold span
of the same label, 0.5 when both boundaries are within 3 characters, and
0.25 when both are within 5. Credit is assigned through a one-to-one
gold-prediction matching that maximizes total credit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .tagging import Span, TagLabel, TaggedComment

LABELS = (TagLabel.IN, TagLabel.OUT, TagLabel.OTHER)

CREDIT_EXACT = 1.0
CREDIT_NEAR = 0.5
CREDIT_LOOSE = 0.25
NEAR_CHARS = 3
LOOSE_CHARS = 5


def pair_credit(gold: Span, pred: Span) -> float:
    """Credit a (gold, predicted) pair would earn; 0.0 means ineligible."""
    if gold.label != pred.label:
        return 0.0
    delta = max(abs(gold.start - pred.start), abs(gold.end - pred.end))
    if delta == 0:
        return CREDIT_EXACT
    if delta <= NEAR_CHARS:
        return CREDIT_NEAR
    if delta <= LOOSE_CHARS:
        return CREDIT_LOOSE
    return 0.0


@dataclass
class CreditPair:
    gold: Span
    pred: Span
    credit: float


@dataclass
class CreditAssignment:
    pairs: list[CreditPair]
    unmatched_gold: list[Span]
    unmatched_pred: list[Span]

    @property
    def total_credit(self) -> float:
        return sum(p.credit for p in self.pairs)


def match_spans(gold: Sequence[Span], pred: Sequence[Span]) -> CreditAssignment:
    """One-to-one credit assignment maximizing total credit.

    Ties between equal-credit assignments break toward pairing earlier gold
    spans with earlier predicted spans.
    """
    gold = sorted(gold, key=lambda s: (s.start, s.end))
    pred = sorted(pred, key=lambda s: (s.start, s.end))
    if not gold or not pred:
        return CreditAssignment(pairs=[], unmatched_gold=list(gold), unmatched_pred=list(pred))

    n, m = len(gold), len(pred)
    credit = np.zeros((n, m))
    for i, g in enumerate(gold):
        for j, p in enumerate(pred):
            credit[i, j] = pair_credit(g, p)
    # Tiny index-ordered perturbation steers the solver toward the
    # earliest-gold/earliest-pred optimum without disturbing the true
    # maximum (credits are quantized at 0.25).
    tie = np.add.outer(np.arange(n) * m, np.arange(m)) / (n * m) * 1e-9
    rows, cols = linear_sum_assignment(credit - tie, maximize=True)

    pairs: list[CreditPair] = []
    used_g: set[int] = set()
    used_p: set[int] = set()
    for i, j in zip(rows, cols):
        c = credit[i, j]
        if c > 0.0:
            pairs.append(CreditPair(gold=gold[i], pred=pred[j], credit=float(c)))
            used_g.add(i)
            used_p.add(j)
    pairs.sort(key=lambda p: (p.gold.start, p.gold.end))
    return CreditAssignment(
        pairs=pairs,
        unmatched_gold=[g for i, g in enumerate(gold) if i not in used_g],
        unmatched_pred=[p for j, p in enumerate(pred) if j not in used_p],
    )


@dataclass
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int
    credit: float


@dataclass
class ScoreReport:
    per_label: dict[str, LabelScore]
    weighted_macro_f1: float
    comments: int
    parse_failures: int = 0

    def to_dict(self) -> dict:
        return {
            "per_label": {
                name: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                    "predicted": s.predicted,
                    "credit": s.credit,
                }
                for name, s in self.per_label.items()
            },
            "weighted_macro_f1": self.weighted_macro_f1,
            "comments": self.comments,
            "parse_failures": self.parse_failures,
        }


def _prf(credit: float, predicted: int, support: int) -> tuple[float, float, float]:
    # 0/0 convention: an empty side scores 1.0 only when the other side is
    # empty too, so perfectly-empty comments never penalize.
    if predicted == 0:
        precision = 1.0 if support == 0 else 0.0
    else:
        precision = credit / predicted
    if support == 0:
        recall = 1.0 if predicted == 0 else 0.0
    else:
        recall = credit / support
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def comment_label_stats(
    gold: Sequence[Span], pred: Sequence[Span]
) -> dict[TagLabel, tuple[float, int, int]]:
    """Per-label (credit, gold count, predicted count) for one comment."""
    assignment = match_spans(gold, pred)
    stats = {label: [0.0, 0, 0] for label in LABELS}
    for p in assignment.pairs:
        stats[p.gold.label][0] += p.credit
    for g in gold:
        stats[g.label][1] += 1
    for p in pred:
        stats[p.label][2] += 1
    return {label: (c, int(ng), int(np_)) for label, (c, ng, np_) in stats.items()}


def _report_from_totals(
    totals: Mapping[TagLabel, tuple[float, int, int]], comments: int, parse_failures: int
) -> ScoreReport:
    per_label: dict[str, LabelScore] = {}
    weighted = 0.0
    total_support = 0
    total_predicted = 0
    for label in LABELS:
        credit, support, predicted = totals[label]
        precision, recall, f1 = _prf(credit, predicted, support)
        per_label[label.value] = LabelScore(
            precision=precision,
            recall=recall,
            f1=f1,
            support=support,
            predicted=predicted,
            credit=credit,
        )
        weighted += support * f1
        total_support += support
        total_predicted += predicted
    if total_support > 0:
        macro = weighted / total_support
    else:
        macro = 1.0 if total_predicted == 0 else 0.0
    return ScoreReport(
        per_label=per_label,
        weighted_macro_f1=macro,
        comments=comments,
        parse_failures=parse_failures,
    )


def f1_report(
    gold: Mapping[str, TaggedComment],
    pred: Mapping[str, TaggedComment],
    parse_failures: int = 0,
) -> ScoreReport:
    """Corpus-level partial-credit report; missing predictions count as empty."""
    ids = sorted(set(gold) | set(pred))
    totals = {label: [0.0, 0, 0] for label in LABELS}
    for cid in ids:
        g = gold.get(cid)
        p = pred.get(cid)
        stats = comment_label_stats(g.spans if g else [], p.spans if p else [])
        for label in LABELS:
            c, ng, np_ = stats[label]
            totals[label][0] += c
            totals[label][1] += ng
            totals[label][2] += np_
    return _report_from_totals(
        {label: tuple(v) for label, v in totals.items()}, len(ids), parse_failures
    )


def render_score_table(reports: Mapping[str, ScoreReport]) -> str:
    """Aligned text table: per-tag F1 rows, one column per condition."""
    names = list(reports)
    col_w = max([10, *(len(n) for n in names)])
    header = f"{'tag':<10}" + "".join(f"{n:>{col_w + 2}}" for n in names)
    lines = [header, "-" * len(header)]
    for label in LABELS:
        cells = "".join(
            f"{reports[n].per_label[label.value].f1:>{col_w + 2}.3f}" for n in names
        )
        lines.append(f"{f'[{label.value}]':<10}" + cells)
    cells = "".join(f"{reports[n].weighted_macro_f1:>{col_w + 2}.3f}" for n in names)
    lines.append(f"{'Overall':<10}" + cells)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Agreement


AGREEMENT_CATEGORIES = ("IN", "OUT", "OTHER", "NONE")


class BadTableError(ValueError):
    """Agreement table rows do not all sum to the rater count."""


@dataclass
class AgreementTable:
    rows: list[list[int]]
    n_raters: int
    categories: tuple[str, ...] = AGREEMENT_CATEGORIES

    def validate(self) -> None:
        if self.n_raters < 2:
            raise BadTableError("need at least 2 raters")
        if not self.rows:
            raise BadTableError("need at least 1 item")
        for i, row in enumerate(self.rows):
            if sum(row) != self.n_raters:
                raise BadTableError(f"bad-table: row {i} sums to {sum(row)} != {self.n_raters}")


def fleiss_kappa(table: AgreementTable) -> float | None:
    """Fleiss kappa; returns None when chance agreement is total (Pe = 1)."""
    table.validate()
    rows = table.rows
    n = table.n_raters
    n_items = len(rows)
    p_i = [(sum(v * v for v in row) - n) / (n * (n - 1)) for row in rows]
    p_bar = sum(p_i) / n_items
    col_totals = [sum(row[j] for row in rows) for j in range(len(rows[0]))]
    p_j = [t / (n_items * n) for t in col_totals]
    p_e = sum(p * p for p in p_j)
    if p_e >= 1.0:
        return None
    return (p_bar - p_e) / (1.0 - p_e)


def dominant_label(tc: TaggedComment) -> str:
    """Most frequent span label of a comment; NONE when it has no spans.

    Ties break in IN, OUT, OTHER order.
    """
    if not tc.spans:
        return "NONE"
    counts = {label: 0 for label in LABELS}
    for span in tc.spans:
        counts[span.label] += 1
    best = max(LABELS, key=lambda label: counts[label])
    return best.value


def build_agreement_table(
    corpora: Sequence[Mapping[str, TaggedComment]],
) -> AgreementTable:
    """Per-comment dominant-label agreement table over the shared comment ids."""
    if len(corpora) < 2:
        raise BadTableError("need at least 2 annotator corpora")
    shared = sorted(set.intersection(*(set(c) for c in corpora)))
    rows: list[list[int]] = []
    for cid in shared:
        row = [0] * len(AGREEMENT_CATEGORIES)
        for corpus in corpora:
            row[AGREEMENT_CATEGORIES.index(dominant_label(corpus[cid]))] += 1
        rows.append(row)
    return AgreementTable(rows=rows, n_raters=len(corpora))


def pairwise_accuracy(
    annotator: Mapping[str, TaggedComment],
    gold: Mapping[str, TaggedComment],
) -> float:
    """Credit-weighted span accuracy of one annotator against gold.

    Per comment: total assigned credit / max(gold spans, annotator spans);
    comments empty on both sides count as 1.0. The per-comment values are
    macro-averaged.
    """
    ids = sorted(set(annotator) | set(gold))
    if not ids:
        return 1.0
    values: list[float] = []
    for cid in ids:
        g = gold.get(cid)
        a = annotator.get(cid)
        g_spans = g.spans if g else []
        a_spans = a.spans if a else []
        if not g_spans and not a_spans:
            values.append(1.0)
            continue
        assignment = match_spans(g_spans, a_spans)
        values.append(assignment.total_credit / max(len(g_spans), len(a_spans)))
    return sum(values) / len(values)


# ---------------------------------------------------------------------------
# Bootstrap


@dataclass
class BootstrapResult:
    p_value: float
    mean_delta: float
    observed_delta: float
    iterations: int
    seed: int


def bootstrap_compare(
    system_a: Mapping[str, TaggedComment],
    system_b: Mapping[str, TaggedComment],
    gold: Mapping[str, TaggedComment],
    iterations: int = 1000,
    seed: int = 0,
) -> BootstrapResult:
    """Paired bootstrap over comments on weighted macro-F1.

    Resamples comment ids with replacement; the p-value is the fraction of
    resamples in which the observed winner does not win. Deterministic for
    a fixed seed. Delta is macro-F1(A) minus macro-F1(B).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    ids = sorted(gold)

    def stats_for(system: Mapping[str, TaggedComment]) -> list[dict[TagLabel, tuple[float, int, int]]]:
        per_comment = []
        for cid in ids:
            g = gold.get(cid)
            p = system.get(cid)
            per_comment.append(comment_label_stats(g.spans if g else [], p.spans if p else []))
        return per_comment

    stats_a = stats_for(system_a)
    stats_b = stats_for(system_b)

    def macro(stats: list[dict[TagLabel, tuple[float, int, int]]], idx: Iterable[int]) -> float:
        totals = {label: [0.0, 0, 0] for label in LABELS}
        count = 0
        for i in idx:
            count += 1
            for label in LABELS:
                c, ng, np_ = stats[i][label]
                totals[label][0] += c
                totals[label][1] += ng
                totals[label][2] += np_
        report = _report_from_totals({l: tuple(v) for l, v in totals.items()}, count, 0)
        return report.weighted_macro_f1

    all_idx = range(len(ids))
    observed = macro(stats_a, all_idx) - macro(stats_b, all_idx)
    rng = np.random.default_rng(seed)
    deltas = []
    losses = 0
    n = len(ids)
    for _ in range(iterations):
        sample = rng.integers(0, n, size=n) if n else np.array([], dtype=int)
        delta = macro(stats_a, sample) - macro(stats_b, sample)
        deltas.append(delta)
        if observed > 0:
            losses += delta <= 0
        elif observed < 0:
            losses += delta >= 0
        else:
            losses += 1
    return BootstrapResult(
        p_value=losses / iterations,
        mean_delta=float(sum(deltas) / len(deltas)),
        observed_delta=observed,
        iterations=iterations,
        seed=seed,
    )
