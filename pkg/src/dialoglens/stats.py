"""Statistical screening of group features against outcomes.

Features are min-max scaled to [-1, 1] within each week, then screened
by Pearson correlation with the outcome score and one-way ANOVA across
the High/Mid/Low classes; a feature passing either test at alpha stays.
p-values come from the regularized incomplete beta function, computed
here by continued fraction.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .corpus import ValidationWarning
from .grouping import DIGEST_COMMENT, GroupFeatureTable, OutcomeLabel

ALPHA = 0.05

_CF_TINY = 1e-300
_CF_EPS = 1e-13
_CF_MAX_ITER = 400


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction backbone of the incomplete beta function."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    # converge fast on whichever side of the mean x falls
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    """Two-tailed tail probability of Student's t."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def f_sf(f: float, df1: float, df2: float) -> float:
    """Upper tail probability of the F distribution."""
    if df1 <= 0 or df2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


@dataclass(frozen=True)
class PearsonResult:
    r: float
    p: float
    n: int


def pearson(x: Sequence[float], y: Sequence[float]) -> PearsonResult:
    """Correlation with a two-tailed t-test p-value.

    Needs n >= 3 and non-constant inputs. |r| = 1 yields p = 0.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    n = xa.size
    if n < 3:
        raise ValueError("correlation needs at least 3 pairs")
    xa = xa - xa.mean()
    ya = ya - ya.mean()
    denom = float(np.linalg.norm(xa) * np.linalg.norm(ya))
    if denom == 0.0:
        raise ValueError("correlation is undefined for constant input")
    r = float(np.dot(xa, ya) / denom)
    r = max(-1.0, min(1.0, r))
    # collinear input rounds to just under +/-1; snap within float noise
    if 1.0 - abs(r) < 4.0 * np.finfo(np.float64).eps:
        r = math.copysign(1.0, r)
    df = n - 2
    if abs(r) == 1.0:
        return PearsonResult(r, 0.0, n)
    t = r * math.sqrt(df / (1.0 - r * r))
    return PearsonResult(r, t_two_tailed_p(t, df), n)


@dataclass(frozen=True)
class AnovaResult:
    f: float
    p: float
    df_between: int
    df_within: int
    ss_between: float
    ss_within: float
    group_sizes: tuple[int, ...]
    degenerate: bool = False


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way ANOVA over two or more groups of observations.

    Zero within-group variance is degenerate: perfectly separated
    means give F = inf with p = 0, and fully constant data gives F = 0
    with p = 1; both set the degenerate flag.
    """
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    k = len(arrays)
    if k < 2:
        raise ValueError("ANOVA needs at least two groups")
    if any(a.ndim != 1 or a.size == 0 for a in arrays):
        raise ValueError("every group needs at least one observation")
    n = sum(a.size for a in arrays)
    if n <= k:
        raise ValueError("ANOVA needs more observations than groups")

    grand = sum(float(a.sum()) for a in arrays) / n
    ssb = sum(a.size * (float(a.mean()) - grand) ** 2 for a in arrays)
    ssw = sum(float(((a - a.mean()) ** 2).sum()) for a in arrays)
    df_b = k - 1
    df_w = n - k
    sizes = tuple(a.size for a in arrays)
    if ssw == 0.0:
        if ssb == 0.0:
            return AnovaResult(0.0, 1.0, df_b, df_w, ssb, ssw, sizes, degenerate=True)
        return AnovaResult(math.inf, 0.0, df_b, df_w, ssb, ssw, sizes, degenerate=True)
    f = (ssb / df_b) / (ssw / df_w)
    return AnovaResult(f, f_sf(f, df_b, df_w), df_b, df_w, ssb, ssw, sizes)


def anova_two(high: Sequence[float], low: Sequence[float]) -> AnovaResult:
    """One-way ANOVA between exactly two groups, df = (1, n1 + n2 - 2)."""
    if len(high) < 2 or len(low) < 2:
        raise ValueError("both groups need at least two observations")
    return anova_oneway([high, low])


@dataclass(frozen=True)
class WeeklyNormalizationReport:
    """(week, column) pairs whose values were constant and mapped to 0."""

    degenerate: tuple[tuple[int, str], ...]


def normalize_weekly(table: GroupFeatureTable) -> tuple[GroupFeatureTable, WeeklyNormalizationReport]:
    """Min-max scale every feature to [-1, 1] within each week.

    x' = 2 (x - min) / (max - min) - 1 over the week's present values;
    a constant column within a week maps to 0 for all its rows and is
    reported. Absent values stay absent. Every week must have at least
    two groups.
    """
    degenerate: list[tuple[int, str]] = []
    new_rows = []
    spans: dict[tuple[int, str], tuple[float, float]] = {}
    for week in table.weeks():
        rows = [r for r in table.rows if r.week == week]
        if len(rows) < 2:
            raise ValueError(f"week {week} has fewer than two groups")
        for col in sorted({c for r in rows for c in r.values}):
            vals = [r.values[col] for r in rows if col in r.values]
            lo, hi = min(vals), max(vals)
            spans[(week, col)] = (lo, hi)
            if lo == hi:
                degenerate.append((week, col))
    for r in table.rows:
        values = {}
        for col, v in r.values.items():
            lo, hi = spans[(r.week, col)]
            values[col] = 0.0 if lo == hi else 2.0 * (v - lo) / (hi - lo) - 1.0
        new_rows.append(replace(r, values=values))
    if degenerate:
        warnings.warn(
            f"{len(degenerate)} constant (week, feature) column(s) normalized to 0",
            ValidationWarning,
            stacklevel=2,
        )
    return GroupFeatureTable(tuple(new_rows)), WeeklyNormalizationReport(tuple(degenerate))


@dataclass(frozen=True)
class FeatureScreen:
    """Every test's evidence for one feature.

    Correlation runs twice, against the outcome score and against the
    within-week rank; ANOVA compares the High and Low classes. A test
    whose preconditions fail holds None. `direction` is the sign of the
    score correlation (falling back to the rank correlation).
    """

    name: str
    n: int
    r_score: float | None
    r_score_p: float | None
    r_rank: float | None
    r_rank_p: float | None
    f: float | None
    f_p: float | None
    selected_by: tuple[str, ...]

    @property
    def direction(self) -> int | None:
        for r in (self.r_score, self.r_rank):
            if r is not None and r != 0:
                return 1 if r > 0 else -1
        return None


@dataclass(frozen=True)
class ScreeningResult:
    alpha: float
    bonferroni: bool
    screens: tuple[FeatureScreen, ...]

    @property
    def selected(self) -> list[str]:
        return [s.name for s in self.screens if s.selected_by]

    def screen_for(self, name: str) -> FeatureScreen:
        for s in self.screens:
            if s.name == name:
                return s
        raise KeyError(name)


def screen_features(
    table: GroupFeatureTable,
    alpha: float = ALPHA,
    bonferroni: bool = False,
) -> ScreeningResult:
    """Keep features where any test is significant at alpha.

    The union rule: a feature is selected if the Pearson p-value
    against the outcome score, the Pearson p-value against the
    within-week rank, or the High-vs-Low ANOVA p-value is strictly
    below the threshold (alpha, or alpha / #features under Bonferroni).
    Rows missing the feature are dropped per feature; a test whose
    preconditions fail (constant values, too-small classes) abstains.
    """
    if any(r.outcome is None or r.rank is None or r.label is None for r in table.rows):
        raise ValueError("screening requires outcome, rank, and label on every row")
    cols = table.columns()
    threshold = alpha / len(cols) if bonferroni and cols else alpha
    screens = []
    for col in cols:
        rows = [r for r in table.rows if col in r.values]
        xs = [r.values[col] for r in rows]

        def correlate(ys: list[float]) -> tuple[float | None, float | None]:
            try:
                res = pearson(xs, ys)
                return res.r, res.p
            except ValueError:
                return None, None

        r_score, r_score_p = correlate([r.outcome for r in rows])
        r_rank, r_rank_p = correlate([float(r.rank) for r in rows])
        f_val = f_p = None
        high = [r.values[col] for r in rows if r.label is OutcomeLabel.HIGH]
        low = [r.values[col] for r in rows if r.label is OutcomeLabel.LOW]
        try:
            res = anova_two(high, low)
            f_val, f_p = res.f, res.p
        except ValueError:
            pass
        selected_by = tuple(
            tag
            for tag, p in (
                ("pearson_score", r_score_p),
                ("pearson_rank", r_rank_p),
                ("anova", f_p),
            )
            if p is not None and p < threshold
        )
        screens.append(
            FeatureScreen(
                col, len(rows), r_score, r_score_p, r_rank, r_rank_p, f_val, f_p, selected_by
            )
        )
    return ScreeningResult(alpha, bonferroni, tuple(screens))


def screening_report_json(result: ScreeningResult, digest: str | None = None) -> str:
    """Serialize the screening evidence and verdicts as JSON."""
    payload = {
        "alpha": result.alpha,
        "bonferroni": result.bonferroni,
        "config_digest": digest,
        "selected": result.selected,
        "features": [
            {
                "name": s.name,
                "n": s.n,
                "r_score": s.r_score,
                "r_score_p": s.r_score_p,
                "r_rank": s.r_rank,
                "r_rank_p": s.r_rank_p,
                "f": s.f,
                "f_p": s.f_p,
                "direction": s.direction,
                "selected_by": list(s.selected_by),
            }
            for s in result.screens
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def load_screening_report(
    path: Union[str, Path], expected_digest: str | None = None
) -> ScreeningResult:
    raw = json.loads(Path(path).read_text("utf-8"))
    if expected_digest is not None and raw.get("config_digest") != expected_digest:
        raise ValueError(
            f"config digest mismatch: report has {raw.get('config_digest')!r}, "
            f"expected {expected_digest!r}"
        )
    screens = tuple(
        FeatureScreen(
            f["name"],
            int(f["n"]),
            f["r_score"],
            f["r_score_p"],
            f["r_rank"],
            f["r_rank_p"],
            f["f"],
            f["f_p"],
            tuple(f["selected_by"]),
        )
        for f in raw["features"]
    )
    return ScreeningResult(float(raw["alpha"]), bool(raw["bonferroni"]), screens)


def quartiles(values: Sequence[float]) -> tuple[float, float, float, float, float]:
    """min, lower quartile, median, upper quartile, max."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no values")
    q = np.percentile(arr, [0, 25, 50, 75, 100])
    return tuple(float(v) for v in q)


def scatter_csv(table: GroupFeatureTable, feature: str, digest: str | None = None) -> str:
    """Feature value against outcome, one row per (group, week)."""
    out = io.StringIO()
    if digest is not None:
        out.write(f"{DIGEST_COMMENT}{digest}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["group_id", "week", feature, "outcome"])
    for r in table.rows:
        if feature in r.values and r.outcome is not None:
            writer.writerow([r.group_id, r.week, repr(r.values[feature]), repr(r.outcome)])
    return out.getvalue()


def box_csv(table: GroupFeatureTable, feature: str, digest: str | None = None) -> str:
    """Five-number summary of the feature per outcome label."""
    out = io.StringIO()
    if digest is not None:
        out.write(f"{DIGEST_COMMENT}{digest}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["label", "count", "min", "q1", "median", "q3", "max"])
    for lab in (OutcomeLabel.HIGH, OutcomeLabel.MID, OutcomeLabel.LOW):
        vals = [r.values[feature] for r in table.rows if r.label is lab and feature in r.values]
        if not vals:
            continue
        mn, q1, med, q3, mx = quartiles(vals)
        writer.writerow([lab.value, len(vals)] + [repr(v) for v in (mn, q1, med, q3, mx)])
    return out.getvalue()


def emit_plot_data(
    table: GroupFeatureTable,
    features: Sequence[str],
    out_dir: Union[str, Path],
    digest: str | None = None,
) -> list[Path]:
    """Write scatter and box CSVs for each feature; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for feature in features:
        scatter_path = out / f"scatter_{feature}.csv"
        scatter_path.write_text(scatter_csv(table, feature, digest), "utf-8")
        box_path = out / f"box_{feature}.csv"
        box_path.write_text(box_csv(table, feature, digest), "utf-8")
        written += [scatter_path, box_path]
    return written
