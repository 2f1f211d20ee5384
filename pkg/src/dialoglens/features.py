"""Per-segment feature extraction.

One record per segment: speaking rate against language-mixed
thresholds, the 19 category counts, math glossary hits, topic relevance
and cohesion from embedding vectors, and whatever acoustic statistics
the frame features provide. A value that cannot be computed is absent,
never zero.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Mapping, Sequence, Union

from .acoustics import FrameFeatureSeries, NormalizationStats, SegmentAcoustics, aggregate_segment, normalize_acoustics
from .corpus import Segment, SessionDialog, SpeakerLabel, count_tokens, language_proportions
from .embedding import EmbeddingTable, KeywordSet, average_vector, cosine, tokenize
from .semantics import (
    CategoryLexicon,
    Glossary,
    TABLE_CATEGORIES,
    Translator,
    count_categories,
    count_math_terms,
    translate_segment,
)


class RateCategory(enum.Enum):
    SLOW = 0
    NORMAL = 1
    FAST = 2


@dataclass(frozen=True)
class SpeakingRateParams:
    """Per-language slow/normal and normal/fast boundaries.

    English boundaries are words per minute, Chinese are characters per
    minute; a mixed segment's thresholds interpolate linearly by token
    proportion.
    """

    english_slow_normal: float = 100.0
    english_normal_fast: float = 120.0
    chinese_slow_normal: float = 225.0
    chinese_normal_fast: float = 255.0

    def __post_init__(self):
        if not 0 < self.english_slow_normal < self.english_normal_fast:
            raise ValueError("English boundaries must satisfy 0 < slow/normal < normal/fast")
        if not 0 < self.chinese_slow_normal < self.chinese_normal_fast:
            raise ValueError("Chinese boundaries must satisfy 0 < slow/normal < normal/fast")

    def thresholds(self, english_prop: float, chinese_prop: float) -> tuple[float, float]:
        lo = self.english_slow_normal * english_prop + self.chinese_slow_normal * chinese_prop
        hi = self.english_normal_fast * english_prop + self.chinese_normal_fast * chinese_prop
        return lo, hi


@dataclass(frozen=True)
class SpeakingRate:
    tokens_per_minute: float
    slow_normal: float
    normal_fast: float
    category: RateCategory


def speaking_rate(segment: Segment, params: SpeakingRateParams = SpeakingRateParams()) -> SpeakingRate:
    """Rate the segment Slow, Normal, or Fast.

    Normal is the closed interval [slow/normal, normal/fast]; both
    boundary rates count as Normal. Raises ValueError if the text has
    no countable tokens.
    """
    counts = count_tokens(segment.text)
    eng, chn = language_proportions(segment.text)
    rate = counts.total / (segment.duration / 60.0)
    lo, hi = params.thresholds(eng, chn)
    if rate < lo:
        category = RateCategory.SLOW
    elif rate > hi:
        category = RateCategory.FAST
    else:
        category = RateCategory.NORMAL
    return SpeakingRate(rate, lo, hi, category)


def merge_context(segments: Sequence[Segment], index: int) -> str:
    """Segment text widened by one neighbor on each side where present."""
    if not 0 <= index < len(segments):
        raise IndexError("segment index out of range")
    parts = [segments[i].text for i in range(max(0, index - 1), min(len(segments), index + 2))]
    return " ".join(parts)


def context_vector(
    segments: Sequence[Segment],
    index: int,
    table: EmbeddingTable,
    translator: Translator,
):
    """Average embedding of the translated merged context, or None."""
    text = translate_segment(merge_context(segments, index), translator)
    return average_vector(tokenize(text), table)


def topic_relevance_score(
    segments: Sequence[Segment],
    index: int,
    keywords: KeywordSet,
    table: EmbeddingTable,
    translator: Translator,
) -> float | None:
    """Cosine of the context vector against the weekly keyword vector.

    Clamped to [0, 1]; None when the context or the keyword set has no
    in-vocabulary token.
    """
    seg_vec = context_vector(segments, index, table, translator)
    key_vec = average_vector(keywords.tokens(), table)
    if seg_vec is None or key_vec is None:
        return None
    return max(0.0, min(1.0, cosine(seg_vec, key_vec)))


def cohesion_score(
    segments: Sequence[Segment],
    index: int,
    table: EmbeddingTable,
    translator: Translator,
) -> float | None:
    """Signed cosine between this context vector and the next one.

    The final segment has no successor and scores None, as does any
    pair with an out-of-vocabulary side.
    """
    if index == len(segments) - 1:
        return None
    a = context_vector(segments, index, table, translator)
    b = context_vector(segments, index + 1, table, translator)
    if a is None or b is None:
        return None
    return cosine(a, b)


FEATURE_SPEAKING_RATE = "SpeakingRate"
FEATURE_RATE_CLASS = "SpeakingRateClass"
FEATURE_MATH_TERMS = "MathTerms"
FEATURE_TOPIC_RELEVANCE = "TRS"
FEATURE_COHESION = "Cohesion"
FEATURE_ENGLISH_WORDS = "EngWords"
FEATURE_CHINESE_CHARS = "CnChars"
FEATURE_DURATION = "Duration"


@dataclass(frozen=True)
class SegmentFeatures:
    """Feature values for one segment; missing keys mean not computable."""

    speaker: SpeakerLabel
    start: float
    end: float
    values: Mapping[str, float] = field(default_factory=dict)

    def get(self, name: str) -> float | None:
        return self.values.get(name)


@dataclass(frozen=True)
class ExtractionSummary:
    """How many segments lacked each optional feature."""

    segments: int
    missing: Mapping[str, int]


@dataclass(frozen=True)
class ExtractionResources:
    """Everything segment feature extraction consumes besides the dialog."""

    keywords: KeywordSet
    table: EmbeddingTable
    translator: Translator
    english_lexicon: CategoryLexicon
    chinese_lexicon: CategoryLexicon
    glossary: Glossary
    rate_params: SpeakingRateParams = SpeakingRateParams()
    frame_features: FrameFeatureSeries | None = None
    normalization: NormalizationStats | None = None


def extract_segment_features(
    dialog: SessionDialog,
    resources: ExtractionResources,
) -> tuple[list[SegmentFeatures], ExtractionSummary]:
    """Compute the full per-segment feature records for one session.

    Category and math-term counts always exist (possibly zero, a real
    count). Speaking rate, topic relevance, cohesion, and acoustics are
    absent when undefined for the segment.
    """
    segments = dialog.segments
    records: list[SegmentFeatures] = []
    missing: dict[str, int] = {}

    def miss(name: str) -> None:
        missing[name] = missing.get(name, 0) + 1

    for i, seg in enumerate(segments):
        values: dict[str, float] = {}
        counts = count_tokens(seg.text)
        values[FEATURE_ENGLISH_WORDS] = float(counts.english_words)
        values[FEATURE_CHINESE_CHARS] = float(counts.chinese_chars)
        values[FEATURE_DURATION] = seg.duration

        try:
            rate = speaking_rate(seg, resources.rate_params)
        except ValueError:
            miss(FEATURE_SPEAKING_RATE)
        else:
            values[FEATURE_SPEAKING_RATE] = rate.tokens_per_minute
            values[FEATURE_RATE_CLASS] = float(rate.category.value)

        cats = count_categories(seg.text, resources.english_lexicon, resources.chinese_lexicon)
        for name in TABLE_CATEGORIES:
            values[name] = float(cats[name])
        values[FEATURE_MATH_TERMS] = float(count_math_terms(seg.text, resources.glossary))

        trs = topic_relevance_score(segments, i, resources.keywords, resources.table, resources.translator)
        if trs is None:
            miss(FEATURE_TOPIC_RELEVANCE)
        else:
            values[FEATURE_TOPIC_RELEVANCE] = trs

        coh = cohesion_score(segments, i, resources.table, resources.translator)
        if coh is None:
            miss(FEATURE_COHESION)
        else:
            values[FEATURE_COHESION] = coh

        if resources.frame_features is not None:
            acoustics = aggregate_segment(resources.frame_features, seg)
            if resources.normalization is not None:
                acoustics = normalize_acoustics(acoustics, seg.speaker, resources.normalization)
            if acoustics:
                values.update(acoustics.values)
            else:
                miss("Acoustics")

        records.append(SegmentFeatures(seg.speaker, seg.start, seg.end, values))
    return records, ExtractionSummary(len(segments), missing)


def segment_acoustics_of(record: SegmentFeatures) -> SegmentAcoustics:
    """Pull the acoustic statistic keys back out of a feature record."""
    prefixes = ("Max_", "Min_", "Avg_")
    return SegmentAcoustics(
        {k: v for k, v in record.values.items() if k.startswith(prefixes)}
    )


def write_segment_features(path: Union[str, Path], records: Sequence[SegmentFeatures]) -> None:
    """Persist records as JSONL with stable key order."""
    lines = []
    for r in records:
        payload = {
            "speaker": r.speaker.serialize(),
            "start": r.start,
            "end": r.end,
            "features": {k: r.values[k] for k in sorted(r.values)},
        }
        lines.append(json.dumps(payload, ensure_ascii=False, sort_keys=False))
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")


def read_segment_features(source: Union[str, Path, IO]) -> list[SegmentFeatures]:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text("utf-8")
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(
                SegmentFeatures(
                    SpeakerLabel.parse(raw["speaker"]),
                    float(raw["start"]),
                    float(raw["end"]),
                    dict(raw["features"]),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"line {lineno}: malformed feature record: {exc}") from exc
    return records
