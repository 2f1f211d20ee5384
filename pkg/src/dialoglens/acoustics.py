"""Frame-level acoustic features and their segment aggregates.

Frames are 0.01 s. Energy and an autocorrelation F0 estimate are
computed here; formants and glottal measures (F1-F3, NAQ, QOQ, H1H2,
PS, MDQ, rd, creak) are ingested from frame-feature CSVs produced by
external estimators, never computed. Segment values are the max, min,
and mean over frames where a feature is present, then z-scored per
gender across the corpus.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence, Union

import numpy as np

from .corpus import Gender, Segment, SpeakerLabel, ValidationWarning

FRAME_S = 0.01

F0_MIN_HZ = 50.0
F0_MAX_HZ = 600.0

BASE_FEATURES = ("F0", "Energy", "F1", "F2", "F3", "NAQ", "QOQ", "H1H2", "PS", "MDQ", "rd", "creak")
STAT_PREFIXES = ("Max", "Min", "Avg")


def frame_energy(samples: Sequence[float]) -> float:
    """Sum of squared sample amplitudes over one frame."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 1:
        raise ValueError("frame must contain at least one sample")
    return float(np.dot(x, x))


# Normalized-autocorrelation peak must reach this ratio of the zero-lag
# value for the frame to count as voiced.
VOICING_THRESHOLD = 0.45
F0_WINDOW_S = 0.040
F0_HOP_S = 0.010


def frame_f0(samples: Sequence[float], sample_rate: float) -> float | None:
    """Autocorrelation pitch estimate in [50, 600] Hz, or None if unvoiced.

    The analysis window must span at least two pitch periods at 50 Hz
    (40 ms). Scale-invariant: the normalized autocorrelation cancels any
    positive gain applied to the waveform.
    """
    x = np.asarray(samples, dtype=np.float64)
    min_samples = int(round(2 * sample_rate / F0_MIN_HZ))
    if x.size < min_samples:
        raise ValueError(
            f"window of {x.size} samples is shorter than two 50 Hz periods ({min_samples})"
        )
    x = x - x.mean()
    r0 = float(np.dot(x, x))
    if r0 <= 0.0:
        return None

    lag_min = max(1, int(math.floor(sample_rate / F0_MAX_HZ)))
    lag_max = min(x.size - 1, int(math.ceil(sample_rate / F0_MIN_HZ)))
    if lag_min >= lag_max:
        return None

    lags = np.arange(lag_min, lag_max + 1)
    corr = np.array([np.dot(x[:-lag], x[lag:]) for lag in lags]) / r0
    best = int(np.argmax(corr))
    if corr[best] < VOICING_THRESHOLD:
        return None
    f0 = sample_rate / float(lags[best])
    if not F0_MIN_HZ <= f0 <= F0_MAX_HZ:
        return None
    return f0


@dataclass(frozen=True)
class FrameFeatureRow:
    """One time-stamped row of named frame feature values."""

    time: float
    values: Mapping[str, float]

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("frame time must be >= 0")


class FrameFeatureSeries:
    """Time-indexed frame features, queryable by half-open interval."""

    def __init__(self, rows: Sequence[FrameFeatureRow], features: Sequence[str]):
        self.features = tuple(features)
        self.times = np.array([r.time for r in rows], dtype=np.float64)
        self.rows = tuple(rows)

    def __len__(self) -> int:
        return len(self.rows)

    def query(self, start: float, end: float) -> tuple[FrameFeatureRow, ...]:
        """Rows with start <= time < end."""
        lo = int(np.searchsorted(self.times, start, side="left"))
        hi = int(np.searchsorted(self.times, end, side="left"))
        return self.rows[lo:hi]


def ingest_frame_features(source: Union[str, bytes, IO]) -> FrameFeatureSeries:
    """Parse a frame-feature CSV: header `time,<feature>[,...]`, empty = absent.

    Unknown columns are kept with a warning; rows with non-increasing
    times are an error; out-of-range F0 values and inconsistent formant
    triples are dropped per row with a warning.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    lines = [ln for ln in source.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty frame-feature stream")

    header = [c.strip() for c in lines[0].split(",")]
    if not header or header[0] != "time":
        raise ValueError("frame-feature CSV must start with a 'time' column")
    features = header[1:]
    unknown = [f for f in features if f not in BASE_FEATURES]
    if unknown:
        warnings.warn(
            f"unknown frame feature column(s) kept: {', '.join(unknown)}",
            ValidationWarning,
            stacklevel=2,
        )

    rows: list[FrameFeatureRow] = []
    prev_time = -math.inf
    f0_dropped = 0
    formant_dropped = 0
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} cells, got {len(cells)}")
        time = float(cells[0])
        if time <= prev_time:
            raise ValueError(f"line {lineno}: non-monotonic time {time}")
        prev_time = time
        values: dict[str, float] = {}
        for name, cell in zip(features, cells[1:]):
            cell = cell.strip()
            if cell:
                values[name] = float(cell)
        if "F0" in values and not F0_MIN_HZ <= values["F0"] <= F0_MAX_HZ:
            del values["F0"]
            f0_dropped += 1
        triple = [values.get(f) for f in ("F1", "F2", "F3")]
        present = [v for v in triple if v is not None]
        if present and (any(v <= 0 for v in present) or present != sorted(present)):
            for f in ("F1", "F2", "F3"):
                values.pop(f, None)
            formant_dropped += 1
        rows.append(FrameFeatureRow(time, values))

    if f0_dropped:
        warnings.warn(f"dropped {f0_dropped} out-of-range F0 value(s)", ValidationWarning, stacklevel=2)
    if formant_dropped:
        warnings.warn(
            f"dropped {formant_dropped} inconsistent formant triple(s)", ValidationWarning, stacklevel=2
        )
    return FrameFeatureSeries(rows, features)


@dataclass(frozen=True)
class SegmentAcoustics:
    """Per-feature Max/Min/Avg statistics for one segment.

    Keys are `<stat>_<feature>` (e.g. Max_F0); a feature with no present
    frames contributes no keys at all.
    """

    values: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.values:
            stat, _, feat = name.partition("_")
            if stat not in STAT_PREFIXES or not feat:
                raise ValueError(f"malformed statistic name {name!r}")
        # Min <= Avg <= Max holds for raw aggregates by construction but
        # not after per-statistic z-scoring, so only completeness is a
        # class invariant.
        for feat in {n.split("_", 1)[1] for n in self.values}:
            if any(self.values.get(f"{p}_{feat}") is None for p in STAT_PREFIXES):
                raise ValueError(f"incomplete statistics for feature {feat}")

    def __bool__(self) -> bool:
        return bool(self.values)

    def get(self, name: str) -> float | None:
        return self.values.get(name)

    def features(self) -> frozenset[str]:
        return frozenset(n.split("_", 1)[1] for n in self.values)


def aggregate_segment(series: FrameFeatureSeries, segment: Segment) -> SegmentAcoustics:
    """Max/Min/Avg of each feature over frames in [segment.start, segment.end).

    Statistics run over present values only; a feature absent from every
    overlapping frame is left out. No overlapping rows at all yields an
    all-absent record that downstream treats as missing.
    """
    rows = series.query(segment.start, segment.end)
    by_feature: dict[str, list[float]] = {}
    for row in rows:
        for name, value in row.values.items():
            by_feature.setdefault(name, []).append(value)

    stats: dict[str, float] = {}
    for name, vals in by_feature.items():
        arr = np.asarray(vals, dtype=np.float64)
        stats[f"Max_{name}"] = float(arr.max())
        stats[f"Min_{name}"] = float(arr.min())
        stats[f"Avg_{name}"] = float(arr.mean())
    return SegmentAcoustics(stats)


@dataclass(frozen=True)
class NormalizationStats:
    """Per gender x statistic name: mean, population std, count."""

    stats: Mapping[str, Mapping[str, tuple[float, float, int]]]

    POOLED = "pooled"

    def lookup(self, gender: Gender, name: str) -> tuple[float, float, int] | None:
        key = self.POOLED if gender is Gender.UNKNOWN else gender.name.lower()
        entry = self.stats.get(key, {})
        return entry.get(name)

    def to_json(self) -> str:
        payload = {
            gender: {name: {"mean": m, "std": s, "count": c} for name, (m, s, c) in entries.items()}
            for gender, entries in sorted(self.stats.items())
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NormalizationStats":
        raw = json.loads(text)
        stats = {
            gender: {name: (v["mean"], v["std"], int(v["count"])) for name, v in entries.items()}
            for gender, entries in raw.items()
        }
        return cls(stats)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json(), "utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "NormalizationStats":
        return cls.from_json(Path(path).read_text("utf-8"))


class NormalizationAccumulator:
    """Two-phase reduction for gender normalization statistics.

    Phase 1 may run in parallel over disjoint corpus shards via `add`;
    phase 2 merges the partials (`merge`) and `finalize` produces the
    per-gender means and population standard deviations. Unknown-gender
    speakers are normalized against the pooled statistics, so every
    observation also feeds the pooled accumulator.
    """

    def __init__(self):
        # key -> name -> [count, sum, sum of squares]
        self._acc: dict[str, dict[str, list[float]]] = {}

    def add(self, speaker: SpeakerLabel, acoustics: SegmentAcoustics) -> None:
        keys = [NormalizationStats.POOLED]
        if speaker.gender is not Gender.UNKNOWN:
            keys.append(speaker.gender.name.lower())
        for key in keys:
            bucket = self._acc.setdefault(key, {})
            for name, value in acoustics.values.items():
                cell = bucket.setdefault(name, [0.0, 0.0, 0.0])
                cell[0] += 1
                cell[1] += value
                cell[2] += value * value

    def merge(self, other: "NormalizationAccumulator") -> "NormalizationAccumulator":
        for key, bucket in other._acc.items():
            mine = self._acc.setdefault(key, {})
            for name, (c, s, sq) in bucket.items():
                cell = mine.setdefault(name, [0.0, 0.0, 0.0])
                cell[0] += c
                cell[1] += s
                cell[2] += sq
        return self

    def finalize(self) -> NormalizationStats:
        out: dict[str, dict[str, tuple[float, float, int]]] = {}
        for key, bucket in self._acc.items():
            entries = {}
            for name, (count, total, sumsq) in bucket.items():
                mean = total / count
                var = max(sumsq / count - mean * mean, 0.0)
                entries[name] = (mean, math.sqrt(var), int(count))
            out[key] = entries
        return NormalizationStats(out)


def normalize_acoustics(
    acoustics: SegmentAcoustics,
    speaker: SpeakerLabel,
    stats: NormalizationStats,
) -> SegmentAcoustics:
    """z-score one segment's statistics against its gender's corpus stats."""
    normalized: dict[str, float] = {}
    degenerate: list[str] = []
    for name, value in acoustics.values.items():
        entry = stats.lookup(speaker.gender, name)
        if entry is None:
            continue
        mean, std, _ = entry
        if std == 0.0:
            degenerate.append(name)
            normalized[name] = 0.0
        else:
            normalized[name] = (value - mean) / std
    if degenerate:
        warnings.warn(
            f"zero variance for {', '.join(sorted(degenerate))}; normalized to 0",
            ValidationWarning,
            stacklevel=2,
        )
    return SegmentAcoustics(normalized)


def gender_normalize(
    items: Iterable[tuple[SpeakerLabel, SegmentAcoustics]],
) -> tuple[list[SegmentAcoustics], NormalizationStats]:
    """Normalize a corpus of segment acoustics in one pass.

    Equivalent to running the two-phase accumulator over the whole
    corpus and applying the finalized statistics to each item in order.
    """
    items = list(items)
    acc = NormalizationAccumulator()
    for speaker, acoustics in items:
        acc.add(speaker, acoustics)
    stats = acc.finalize()
    return [normalize_acoustics(a, s, stats) for s, a in items], stats
