"""Group-level aggregation, outcome scores, ranks, and labels.

Segment features roll up to one row per (group, week) under seven
aggregations. Student aggregations cover roster students only; dialog
aggregations cover every segment of the session, whoever spoke it.
Variances are population variances.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .corpus import Role, SpeakerLabel
from .features import SegmentFeatures

AGGREGATIONS = (
    "StudentSumMean",
    "StudentSumVar",
    "StudentMeanMean",
    "StudentMeanVar",
    "DialogSum",
    "DialogMean",
    "DialogVar",
)


def aggregate_group(
    records: Sequence[SegmentFeatures],
    roster: frozenset[SpeakerLabel],
) -> dict[str, float]:
    """Aggregate one session's segment features to group level.

    For each feature: per-student sums and means (students on the
    roster, over their segments where the value is present) are averaged
    and variance-pooled across students; dialog sum/mean/variance run
    over all segments with the value present. A feature no segment
    carries, or that no roster student carries for the student
    aggregations, is absent from the result.
    """
    if not roster:
        raise ValueError("roster must name at least one student")
    if any(s.role is not Role.IN_GROUP_STUDENT for s in roster):
        raise ValueError("roster may contain in-group students only")

    names = sorted({name for r in records for name in r.values})
    out: dict[str, float] = {}
    for name in names:
        dialog_vals = np.array(
            [r.values[name] for r in records if name in r.values], dtype=np.float64
        )
        out[f"{name}_DialogSum"] = float(dialog_vals.sum())
        out[f"{name}_DialogMean"] = float(dialog_vals.mean())
        out[f"{name}_DialogVar"] = float(dialog_vals.var())

        sums = []
        means = []
        for student in sorted(roster, key=lambda s: s.serialize()):
            vals = [r.values[name] for r in records if r.speaker == student and name in r.values]
            if vals:
                sums.append(float(np.sum(vals)))
                means.append(float(np.mean(vals)))
        if sums:
            sums_arr = np.array(sums)
            means_arr = np.array(means)
            out[f"{name}_StudentSumMean"] = float(sums_arr.mean())
            out[f"{name}_StudentSumVar"] = float(sums_arr.var())
            out[f"{name}_StudentMeanMean"] = float(means_arr.mean())
            out[f"{name}_StudentMeanVar"] = float(means_arr.var())
    return out


def outcome_score(
    midterm: float,
    midterm_full: float,
    final: float,
    final_full: float,
    *,
    midterm_weight: float = 0.4,
    final_weight: float = 0.6,
) -> float:
    """Weighted exam score as a fraction of the weighted full marks."""
    if midterm_full <= 0 or final_full <= 0:
        raise ValueError("full marks must be positive")
    if not 0 <= midterm <= midterm_full:
        raise ValueError(f"midterm score {midterm} outside [0, {midterm_full}]")
    if not 0 <= final <= final_full:
        raise ValueError(f"final score {final} outside [0, {final_full}]")
    return (midterm_weight * midterm + final_weight * final) / (
        midterm_weight * midterm_full + final_weight * final_full
    )


class OutcomeLabel(enum.Enum):
    HIGH = "High"
    MID = "Mid"
    LOW = "Low"


def rank_groups(scores: Mapping[str, float]) -> dict[str, int]:
    """Rank by descending score: best gets len(scores), worst gets 1.

    Ties resolve deterministically; the lexicographically smaller
    group id takes the higher rank.
    """
    if not scores:
        raise ValueError("no scores to rank")
    ordered = sorted(scores, key=lambda g: (-scores[g], g))
    return {g: len(ordered) - i for i, g in enumerate(ordered)}


def label_groups(scores: Mapping[str, float]) -> dict[str, OutcomeLabel]:
    """Top 30% High, bottom 30% Low (counts rounded up), rest Mid."""
    n = len(scores)
    if n < 3:
        raise ValueError("labeling needs at least three groups")
    k = math.ceil(0.3 * n)
    ranks = rank_groups(scores)
    labels = {}
    for group, rank in ranks.items():
        if rank > n - k:
            labels[group] = OutcomeLabel.HIGH
        elif rank <= k:
            labels[group] = OutcomeLabel.LOW
        else:
            labels[group] = OutcomeLabel.MID
    return labels


@dataclass(frozen=True)
class GroupMarks:
    midterm: float
    midterm_full: float
    final: float
    final_full: float

    def score(self) -> float:
        return outcome_score(self.midterm, self.midterm_full, self.final, self.final_full)


def load_marks_csv(path: Union[str, Path]) -> dict[str, GroupMarks]:
    """group_id,midterm,midterm_full,final,final_full rows."""
    text = Path(path).read_text("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    required = {"group_id", "midterm", "midterm_full", "final", "final_full"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ValueError(f"marks CSV must have columns {sorted(required)}")
    marks: dict[str, GroupMarks] = {}
    for row in reader:
        gid = row["group_id"].strip()
        if gid in marks:
            raise ValueError(f"duplicate marks for group {gid}")
        marks[gid] = GroupMarks(
            float(row["midterm"]),
            float(row["midterm_full"]),
            float(row["final"]),
            float(row["final_full"]),
        )
    return marks


def load_topics_map(path: Union[str, Path]) -> dict[int, str]:
    """week,topic_id rows mapping each session week to its course topic."""
    text = Path(path).read_text("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"week", "topic_id"}.issubset(reader.fieldnames):
        raise ValueError("topics map must have columns ['topic_id', 'week']")
    topics: dict[int, str] = {}
    for row in reader:
        week = int(row["week"])
        if week in topics:
            raise ValueError(f"duplicate topic for week {week}")
        topics[week] = row["topic_id"].strip()
    return topics


@dataclass(frozen=True)
class GroupWeekRow:
    """One (group, week) of aggregated features plus outcome columns."""

    group_id: str
    week: int
    values: Mapping[str, float] = field(default_factory=dict)
    outcome: float | None = None
    rank: int | None = None
    label: OutcomeLabel | None = None


DIGEST_COMMENT = "# config_digest="


@dataclass(frozen=True)
class GroupFeatureTable:
    """All (group, week) rows, ordered by (group_id, week)."""

    rows: tuple[GroupWeekRow, ...]

    def __post_init__(self):
        keys = [(r.group_id, r.week) for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (group, week) rows")
        object.__setattr__(
            self, "rows", tuple(sorted(self.rows, key=lambda r: (r.group_id, r.week)))
        )

    def columns(self) -> list[str]:
        return sorted({name for r in self.rows for name in r.values})

    def weeks(self) -> list[int]:
        return sorted({r.week for r in self.rows})

    def groups(self) -> list[str]:
        return sorted({r.group_id for r in self.rows})

    def with_outcomes(self, marks: Mapping[str, GroupMarks]) -> "GroupFeatureTable":
        """Attach scores, then per-week ranks and labels.

        Every group in the table must have marks; ranks and labels are
        computed within each week over the groups present that week.
        """
        missing = [g for g in self.groups() if g not in marks]
        if missing:
            raise ValueError(f"no marks for group(s): {', '.join(missing)}")
        scores = {g: marks[g].score() for g in self.groups()}
        new_rows = []
        for week in self.weeks():
            week_rows = [r for r in self.rows if r.week == week]
            week_scores = {r.group_id: scores[r.group_id] for r in week_rows}
            ranks = rank_groups(week_scores)
            labels = label_groups(week_scores)
            for r in week_rows:
                new_rows.append(
                    replace(
                        r,
                        outcome=scores[r.group_id],
                        rank=ranks[r.group_id],
                        label=labels[r.group_id],
                    )
                )
        return GroupFeatureTable(tuple(new_rows))

    def to_csv(self, digest: str | None = None) -> str:
        """Render the table; absent values become empty cells."""
        cols = self.columns()
        out = io.StringIO()
        if digest is not None:
            out.write(f"{DIGEST_COMMENT}{digest}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["group_id", "week", "outcome", "rank", "label"] + cols)
        for r in self.rows:
            writer.writerow(
                [
                    r.group_id,
                    r.week,
                    "" if r.outcome is None else repr(r.outcome),
                    "" if r.rank is None else r.rank,
                    "" if r.label is None else r.label.value,
                ]
                + ["" if c not in r.values else repr(r.values[c]) for c in cols]
            )
        return out.getvalue()

    def save(self, path: Union[str, Path], digest: str | None = None) -> None:
        Path(path).write_text(self.to_csv(digest), "utf-8")

    @classmethod
    def from_csv(cls, text: str, expected_digest: str | None = None) -> "GroupFeatureTable":
        lines = text.splitlines()
        digest = None
        if lines and lines[0].startswith(DIGEST_COMMENT):
            digest = lines[0][len(DIGEST_COMMENT):].strip()
            lines = lines[1:]
        if expected_digest is not None and digest != expected_digest:
            raise ValueError(
                f"config digest mismatch: table has {digest!r}, expected {expected_digest!r}"
            )
        reader = csv.reader(lines)
        header = next(reader, None)
        fixed = ["group_id", "week", "outcome", "rank", "label"]
        if header is None or header[: len(fixed)] != fixed:
            raise ValueError(f"group feature table must start with columns {fixed}")
        cols = header[len(fixed):]
        rows = []
        for cells in reader:
            if not cells:
                continue
            gid, week, outcome, rank, label = cells[: len(fixed)]
            values = {
                c: float(v) for c, v in zip(cols, cells[len(fixed):]) if v != ""
            }
            rows.append(
                GroupWeekRow(
                    gid,
                    int(week),
                    values,
                    outcome=float(outcome) if outcome else None,
                    rank=int(rank) if rank else None,
                    label=OutcomeLabel(label) if label else None,
                )
            )
        return cls(tuple(rows))

    @classmethod
    def load(
        cls, path: Union[str, Path], expected_digest: str | None = None
    ) -> "GroupFeatureTable":
        return cls.from_csv(Path(path).read_text("utf-8"), expected_digest)
