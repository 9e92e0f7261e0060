"""Windowed reference frequencies over win probability, trends, and exports.

Win probability is divided into fixed-width percentage windows
(lower-inclusive, final window closed). Per window we count the comments
satisfying each reference variable and normalize either by all comments in
the window or by only those comments that contain any reference. Ordinary
least squares then fits frequency against window midpoint.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

from scipy.stats import t as student_t

from .ingest import GroundedComment
from .lexicon import Lexicon, normalize_surface
from .tagging import Span, TagLabel, TaggedComment


@dataclass(frozen=True)
class AnalysisComment:
    """The slice of a tagged, grounded comment the window statistics need."""

    comment_id: str
    wp: float
    text: str
    spans: tuple[Span, ...]

    @classmethod
    def build(cls, grounded: GroundedComment, tagged: TaggedComment | None) -> "AnalysisComment":
        spans = tuple(tagged.spans) if tagged is not None else ()
        return cls(comment_id=grounded.id, wp=grounded.wp, text=grounded.segmented_body, spans=spans)


Variable = Callable[[AnalysisComment], bool]


def _has_label(comment: AnalysisComment, label: TagLabel) -> bool:
    return any(s.label is label for s in comment.spans)


def _has_lexeme_label(comment: AnalysisComment, lexemes: frozenset[str], label: TagLabel) -> bool:
    return any(
        s.label is label
        and not s.implicit
        and normalize_surface(comment.text[s.start : s.end]) in lexemes
        for s in comment.spans
    )


def make_variables(lexicon: Lexicon | None = None) -> dict[str, Variable]:
    """The standard reference variables, extensible by callers.

    The we/they variables need a lexicon for the pronoun lexeme sets and are
    omitted when none is given.
    """
    variables: dict[str, Variable] = {
        "any": lambda c: len(c.spans) > 0,
        "none": lambda c: len(c.spans) == 0,
        "in": lambda c: _has_label(c, TagLabel.IN),
        "out": lambda c: _has_label(c, TagLabel.OUT),
        "other": lambda c: _has_label(c, TagLabel.OTHER),
        "sent_implicit": lambda c: any(s.implicit for s in c.spans),
    }
    if lexicon is not None:
        we = lexicon.pronouns_in
        they = lexicon.pronouns_third
        variables["we_in"] = lambda c: _has_lexeme_label(c, we, TagLabel.IN)
        variables["they_in"] = lambda c: _has_lexeme_label(c, they, TagLabel.IN)
        variables["they_out"] = lambda c: _has_lexeme_label(c, they, TagLabel.OUT)
    return variables


class Normalization(str, Enum):
    ALL_COMMENTS = "all"
    REFERENCING_COMMENTS = "referencing"


def window_index(wp: float, width: int) -> int:
    """Window index for a wp fraction; windows are [k, k+w) with the last closed."""
    n_windows = 100 // width
    pct = round(wp * 100.0, 6)  # wp is quantized upstream; undo float drift
    return min(int(pct // width), n_windows - 1)


@dataclass
class WindowStat:
    lower: float
    midpoint: float
    total: int
    referencing: int
    counts: dict[str, int]
    freqs: dict[str, float | None]


@dataclass
class WindowSeries:
    width: int
    normalization: Normalization
    variables: tuple[str, ...]
    windows: list[WindowStat]

    @property
    def total_comments(self) -> int:
        return sum(w.total for w in self.windows)


def window_stats(
    comments: Sequence[AnalysisComment],
    width: int = 5,
    variables: Mapping[str, Variable] | None = None,
    normalization: Normalization = Normalization.ALL_COMMENTS,
) -> WindowSeries:
    """Per-window counts and frequencies of each reference variable.

    A comment is counted once per variable it satisfies. The frequency
    denominator is the window's comment total (ALL_COMMENTS) or its count
    of comments with at least one span (REFERENCING_COMMENTS); windows with
    a zero denominator record None.
    """
    if width <= 0 or 100 % width != 0:
        raise ValueError(f"window width must divide 100, got {width}")
    if variables is None:
        variables = make_variables()
    n_windows = 100 // width
    totals = [0] * n_windows
    referencing = [0] * n_windows
    counts = [{name: 0 for name in variables} for _ in range(n_windows)]
    for c in comments:
        idx = window_index(c.wp, width)
        totals[idx] += 1
        if c.spans:
            referencing[idx] += 1
        for name, predicate in variables.items():
            if predicate(c):
                counts[idx][name] += 1

    windows: list[WindowStat] = []
    for i in range(n_windows):
        denom = totals[i] if normalization is Normalization.ALL_COMMENTS else referencing[i]
        freqs: dict[str, float | None] = {}
        for name in variables:
            freqs[name] = counts[i][name] / denom if denom > 0 else None
        windows.append(
            WindowStat(
                lower=float(i * width),
                midpoint=i * width + width / 2.0,
                total=totals[i],
                referencing=referencing[i],
                counts=dict(counts[i]),
                freqs=freqs,
            )
        )
    return WindowSeries(
        width=width,
        normalization=normalization,
        variables=tuple(variables),
        windows=windows,
    )


@dataclass
class TrendFit:
    variable: str
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    slope_se: float | None = None
    slope_ci_low: float | None = None
    slope_ci_high: float | None = None


def _ols(xs: Sequence[float], ys: Sequence[float], variable: str) -> TrendFit:
    n = len(xs)
    if n < 2:
        raise ValueError(f"need at least 2 points to fit {variable}, got {n}")
    x_mean = sum(xs) / n
    y_mean = sum(ys) / n
    sxx = sum((x - x_mean) ** 2 for x in xs)
    if sxx == 0.0:
        raise ValueError(f"zero variance in x while fitting {variable}")
    sxy = sum((x - x_mean) * (y - y_mean) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    ss_tot = sum((y - y_mean) ** 2 for y in ys)
    ss_res = sum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
    # Constant y: slope is 0 and R^2 is reported as 0 by convention.
    r_squared = 0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    slope_se = ci_low = ci_high = None
    if n > 2:
        slope_se = math.sqrt(ss_res / (n - 2) / sxx)
        t_crit = float(student_t.ppf(0.975, n - 2))
        ci_low = slope - t_crit * slope_se
        ci_high = slope + t_crit * slope_se
    return TrendFit(
        variable=variable,
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        n_points=n,
        slope_se=slope_se,
        slope_ci_low=ci_low,
        slope_ci_high=ci_high,
    )


def fit_trend(series: WindowSeries, variable: str) -> TrendFit:
    """OLS of a variable's frequency against window midpoint (percent points).

    Windows with an undefined frequency are excluded from the fit.
    """
    if variable not in series.variables:
        raise KeyError(f"unknown variable {variable!r}")
    points = [
        (w.midpoint, w.freqs[variable]) for w in series.windows if w.freqs[variable] is not None
    ]
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return _ols(xs, ys, variable)


def fit_all_trends(series: WindowSeries) -> dict[str, TrendFit]:
    return {name: fit_trend(series, name) for name in series.variables}


@dataclass
class DensityBin:
    lower: float
    midpoint: float
    count: int


def comment_density(comments: Sequence[AnalysisComment], width: int = 5) -> list[DensityBin]:
    """Histogram of comment counts per WP window; counts sum to corpus size."""
    if width <= 0 or 100 % width != 0:
        raise ValueError(f"window width must divide 100, got {width}")
    n_windows = 100 // width
    counts = [0] * n_windows
    for c in comments:
        counts[window_index(c.wp, width)] += 1
    return [
        DensityBin(lower=float(i * width), midpoint=i * width + width / 2.0, count=counts[i])
        for i in range(n_windows)
    ]


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return format(value, ".6g")


def export_report(
    series: WindowSeries,
    fits: Mapping[str, TrendFit],
    density: Sequence[DensityBin],
    outdir: str | Path,
    prefix: str = "",
) -> dict[str, Path]:
    """Write the per-window, trend, and density tables as CSV plus JSON mirrors.

    Row order is deterministic: variable name, then window lower bound.
    ``prefix`` prepends every filename (used when emitting a second
    normalization alongside the default).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    windows_csv = outdir / f"{prefix}windows.csv"
    with open(windows_csv, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["variable", "window_lower", "midpoint", "count", "denominator", "frequency"])
        for name in series.variables:
            for w in series.windows:
                denom = w.total if series.normalization is Normalization.ALL_COMMENTS else w.referencing
                writer.writerow(
                    [name, _fmt(w.lower), _fmt(w.midpoint), w.counts[name], denom, _fmt(w.freqs[name])]
                )
    paths["windows_csv"] = windows_csv

    trends_csv = outdir / f"{prefix}trends.csv"
    with open(trends_csv, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["feature", "slope_e4", "r_squared", "intercept", "n_points", "slope_se_e4", "slope_ci_low_e4", "slope_ci_high_e4"]
        )
        for name in sorted(fits):
            fit = fits[name]
            writer.writerow(
                [
                    name,
                    _fmt(fit.slope * 1e4),
                    _fmt(fit.r_squared),
                    _fmt(fit.intercept),
                    fit.n_points,
                    _fmt(fit.slope_se * 1e4 if fit.slope_se is not None else None),
                    _fmt(fit.slope_ci_low * 1e4 if fit.slope_ci_low is not None else None),
                    _fmt(fit.slope_ci_high * 1e4 if fit.slope_ci_high is not None else None),
                ]
            )
    paths["trends_csv"] = trends_csv

    density_csv = outdir / f"{prefix}density.csv"
    with open(density_csv, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["window_lower", "midpoint", "count"])
        for b in density:
            writer.writerow([_fmt(b.lower), _fmt(b.midpoint), b.count])
    paths["density_csv"] = density_csv

    windows_json = outdir / f"{prefix}windows.json"
    with open(windows_json, "w", encoding="utf-8") as f:
        json.dump(
            {
                "width": series.width,
                "normalization": series.normalization.value,
                "windows": [
                    {
                        "lower": w.lower,
                        "midpoint": w.midpoint,
                        "total": w.total,
                        "referencing": w.referencing,
                        "counts": w.counts,
                        "freqs": w.freqs,
                    }
                    for w in series.windows
                ],
            },
            f,
            indent=2,
            sort_keys=True,
        )
    paths["windows_json"] = windows_json

    trends_json = outdir / f"{prefix}trends.json"
    with open(trends_json, "w", encoding="utf-8") as f:
        json.dump(
            {
                name: {
                    "slope": fits[name].slope,
                    "slope_e4": fits[name].slope * 1e4,
                    "intercept": fits[name].intercept,
                    "r_squared": fits[name].r_squared,
                    "n_points": fits[name].n_points,
                    "slope_se": fits[name].slope_se,
                    "slope_ci_low": fits[name].slope_ci_low,
                    "slope_ci_high": fits[name].slope_ci_high,
                }
                for name in sorted(fits)
            },
            f,
            indent=2,
            sort_keys=True,
        )
    paths["trends_json"] = trends_json

    density_json = outdir / f"{prefix}density.json"
    with open(density_json, "w", encoding="utf-8") as f:
        json.dump(
            [{"lower": b.lower, "midpoint": b.midpoint, "count": b.count} for b in density],
            f,
            indent=2,
            sort_keys=True,
        )
    paths["density_json"] = density_json
    return paths
