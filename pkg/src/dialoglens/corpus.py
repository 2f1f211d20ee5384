"""Diarized bilingual transcript parsing, validation, and tokenization.

Transcripts arrive as JSON Lines (one segment per line) or TSV with the
same fields: start, end, speaker, text. Speaker labels follow the
compact diarization taxonomy (SM1, SF2, TM1, P, OM1, ...). Text is
code-switched Chinese/English; English is counted in word units and
Chinese in character units, punctuation ignored.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Union


class ValidationWarning(UserWarning):
    """Non-fatal deviation from transcript conventions."""


class TranscriptError(ValueError):
    """Malformed transcript record; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Role(Enum):
    IN_GROUP_STUDENT = "S"
    PROFESSOR = "P"
    TEACHING_ASSISTANT = "T"
    OUT_OF_GROUP = "O"


class Gender(Enum):
    MALE = "M"
    FEMALE = "F"
    UNKNOWN = "U"


_LABEL_RE = re.compile(r"^([STO])([MF])([1-9][0-9]*)$")


@dataclass(frozen=True, order=True)
class SpeakerLabel:
    """Anonymized speaker identity: role, gender, and per-role index.

    The professor label is the bare string "P" (no gender, no index);
    every other label is role letter + gender letter + index, e.g. SM1.
    """

    role: Role
    gender: Gender = Gender.UNKNOWN
    index: int | None = None

    def __post_init__(self):
        if self.role is Role.PROFESSOR:
            if self.index is not None or self.gender is not Gender.UNKNOWN:
                raise ValueError("professor label carries no gender or index")
        else:
            if self.index is None or self.index < 1:
                raise ValueError(f"{self.role.name} label requires index >= 1")
            if self.gender is Gender.UNKNOWN:
                raise ValueError(f"{self.role.name} label requires M or F gender")

    @classmethod
    def parse(cls, text: str) -> "SpeakerLabel":
        text = text.strip()
        if text == "P":
            return cls(Role.PROFESSOR)
        m = _LABEL_RE.match(text)
        if not m:
            raise ValueError(f"unparsable speaker label {text!r}")
        role, gender, index = m.groups()
        return cls(Role(role), Gender(gender), int(index))

    def serialize(self) -> str:
        if self.role is Role.PROFESSOR:
            return "P"
        return f"{self.role.value}{self.gender.value}{self.index}"

    def __str__(self) -> str:
        return self.serialize()


@dataclass(frozen=True)
class Segment:
    """One diarized utterance: [start, end) seconds, speaker, raw text."""

    start: float
    end: float
    speaker: SpeakerLabel
    text: str

    def __post_init__(self):
        if self.start < 0:
            raise ValueError(f"segment start {self.start} < 0")
        if self.end <= self.start:
            raise ValueError(
                f"segment duration must be positive (start={self.start}, end={self.end})"
            )
        if not self.text.strip():
            raise ValueError("segment text empty after trimming")

    @property
    def duration(self) -> float:
        return self.end - self.start


# Pause longer than this between same-speaker segments marks a legitimate
# segment boundary; shorter gaps should have been merged by the transcriber.
PAUSE_BOUNDARY_S = 1.0


@dataclass(frozen=True)
class SessionDialog:
    """One group's discussion for one week: ordered segments plus roster."""

    group_id: str
    week: int
    segments: tuple[Segment, ...]
    roster: frozenset[SpeakerLabel] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.week < 1:
            raise ValueError(f"week must be >= 1, got {self.week}")
        segments = tuple(self.segments)
        starts = [s.start for s in segments]
        if starts != sorted(starts):
            warnings.warn(
                f"{self.group_id} week {self.week}: segments out of start-time "
                "order; auto-sorting",
                ValidationWarning,
                stacklevel=2,
            )
            segments = tuple(sorted(segments, key=lambda s: s.start))
        object.__setattr__(self, "segments", segments)

        in_group = self.in_group_speakers()
        roster = frozenset(self.roster) if self.roster else in_group
        extra = roster - in_group
        if extra:
            names = ", ".join(sorted(str(s) for s in extra))
            raise ValueError(f"roster lists speakers never heard in-group: {names}")
        object.__setattr__(self, "roster", roster)

        for prev, cur in zip(segments, segments[1:]):
            if prev.speaker == cur.speaker and cur.start - prev.end <= PAUSE_BOUNDARY_S:
                warnings.warn(
                    f"{self.group_id} week {self.week}: consecutive segments by "
                    f"{prev.speaker} separated by {cur.start - prev.end:.2f} s "
                    f"(<= {PAUSE_BOUNDARY_S} s); expected a merged segment",
                    ValidationWarning,
                    stacklevel=2,
                )

    def in_group_speakers(self) -> frozenset[SpeakerLabel]:
        return frozenset(
            s.speaker for s in self.segments if s.speaker.role is Role.IN_GROUP_STUDENT
        )

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class TokenCount:
    english_words: int
    chinese_chars: int

    def __post_init__(self):
        if self.english_words < 0 or self.chinese_chars < 0:
            raise ValueError("token counts must be non-negative")

    @property
    def total(self) -> int:
        return self.english_words + self.chinese_chars


def is_cjk(char: str) -> bool:
    """True for CJK Unified Ideograph code points (base block + extensions)."""
    cp = ord(char)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0x20000 <= cp <= 0x2EBEF
        or 0x30000 <= cp <= 0x323AF
    )


_LATIN_RUN_RE = re.compile(r"[A-Za-z0-9]+")


def count_tokens(text: str) -> TokenCount:
    """Count English word units and Chinese character units in mixed text.

    English words are maximal runs of Latin letters/digits; every CJK
    Unified Ideograph counts as one Chinese character. Punctuation
    (Latin and full-width alike) and whitespace contribute to neither.
    """
    english = len(_LATIN_RUN_RE.findall(text))
    chinese = sum(1 for ch in text if is_cjk(ch))
    return TokenCount(english, chinese)


def language_proportions(text: str) -> tuple[float, float]:
    """(English proportion, Chinese proportion) of countable tokens in text."""
    counts = count_tokens(text)
    if counts.total == 0:
        raise ValueError("no countable tokens")
    eng = counts.english_words / counts.total
    return eng, 1.0 - eng


class TranscriptFormat(Enum):
    JSONL = "jsonl"
    TSV = "tsv"


_TSV_HEADER = ["start", "end", "speaker", "text"]


def _record_from_json(line: str, lineno: int) -> Segment:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TranscriptError(f"invalid JSON: {exc.msg}", lineno) from exc
    if not isinstance(obj, dict):
        raise TranscriptError("record is not a JSON object", lineno)
    missing = [k for k in _TSV_HEADER if k not in obj]
    if missing:
        raise TranscriptError(f"missing fields: {', '.join(missing)}", lineno)
    return _build_segment(obj["start"], obj["end"], obj["speaker"], obj["text"], lineno)


def _record_from_tsv(line: str, lineno: int) -> Segment:
    parts = line.split("\t")
    if len(parts) != 4:
        raise TranscriptError(f"expected 4 tab-separated fields, got {len(parts)}", lineno)
    return _build_segment(parts[0], parts[1], parts[2], parts[3], lineno)


def _build_segment(start, end, speaker, text, lineno: int) -> Segment:
    try:
        start_s = float(start)
        end_s = float(end)
    except (TypeError, ValueError) as exc:
        raise TranscriptError(f"non-numeric timestamps ({start!r}, {end!r})", lineno) from exc
    try:
        label = SpeakerLabel.parse(str(speaker))
    except ValueError as exc:
        raise TranscriptError(str(exc), lineno) from exc
    try:
        return Segment(start_s, end_s, label, str(text))
    except ValueError as exc:
        raise TranscriptError(str(exc), lineno) from exc


def parse_transcript(
    source: Union[bytes, str, IO],
    fmt: TranscriptFormat = TranscriptFormat.JSONL,
    *,
    group_id: str = "",
    week: int = 1,
    roster: Iterable[SpeakerLabel] = (),
) -> SessionDialog:
    """Parse one transcript into a validated SessionDialog.

    Every malformed record raises TranscriptError with its line number;
    records are never silently dropped. Exact duplicate records are
    rejected (they indicate a transcription merge error).
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")

    segments: list[Segment] = []
    seen: set[tuple] = set()
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip("\r\n")
        if not line.strip():
            continue
        if fmt is TranscriptFormat.TSV:
            if lineno == 1 and [c.strip() for c in line.split("\t")] == _TSV_HEADER:
                continue
            seg = _record_from_tsv(line, lineno)
        else:
            seg = _record_from_json(line, lineno)
        key = (seg.start, seg.end, seg.speaker, seg.text)
        if key in seen:
            raise TranscriptError("duplicate record", lineno)
        seen.add(key)
        segments.append(seg)

    if not segments:
        raise TranscriptError("transcript contains no records")
    return SessionDialog(group_id, week, tuple(segments), frozenset(roster))


def serialize_transcript(dialog: SessionDialog) -> str:
    """Emit the canonical JSONL form (one segment per line, stable keys)."""
    lines = []
    for seg in dialog.segments:
        lines.append(
            json.dumps(
                {
                    "start": seg.start,
                    "end": seg.end,
                    "speaker": seg.speaker.serialize(),
                    "text": seg.text,
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n"


_FILENAME_RE = re.compile(r"^(?P<group>.+)_week(?P<week>\d+)$")


def session_path_info(path: Union[str, Path]) -> tuple[str, int]:
    """Extract (group_id, week) from a `<group_id>_week<NN>` file name."""
    stem = Path(path).stem
    m = _FILENAME_RE.match(stem)
    if not m:
        raise ValueError(f"file name {Path(path).name!r} does not match <group>_week<NN>")
    return m.group("group"), int(m.group("week"))


def load_transcript(
    path: Union[str, Path],
    roster: Iterable[SpeakerLabel] = (),
) -> SessionDialog:
    """Load one transcript file, inferring group/week from its name."""
    path = Path(path)
    group_id, week = session_path_info(path)
    fmt = TranscriptFormat.TSV if path.suffix.lower() == ".tsv" else TranscriptFormat.JSONL
    return parse_transcript(
        path.read_bytes(), fmt, group_id=group_id, week=week, roster=roster
    )


def load_roster_file(path: Union[str, Path]) -> dict[str, frozenset[SpeakerLabel]]:
    """Read the roster sidecar: JSON mapping group_id -> in-group labels."""
    data = json.loads(Path(path).read_text("utf-8"))
    if not isinstance(data, dict):
        raise ValueError("roster sidecar must be a JSON object")
    out: dict[str, frozenset[SpeakerLabel]] = {}
    for group_id, labels in data.items():
        parsed = frozenset(SpeakerLabel.parse(str(v)) for v in labels)
        for label in parsed:
            if label.role is not Role.IN_GROUP_STUDENT:
                raise ValueError(
                    f"roster for {group_id!r} lists non-student label {label}"
                )
        out[str(group_id)] = parsed
    return out


def load_corpus_dir(
    corpus_dir: Union[str, Path],
    roster_path: Union[str, Path, None] = None,
) -> list[SessionDialog]:
    """Load every transcript under a directory, sorted by (group, week)."""
    corpus_dir = Path(corpus_dir)
    rosters: dict[str, frozenset[SpeakerLabel]] = {}
    if roster_path is None:
        candidate = corpus_dir / "roster.json"
        if candidate.exists():
            rosters = load_roster_file(candidate)
    else:
        rosters = load_roster_file(roster_path)

    sessions = []
    paths = sorted(list(corpus_dir.glob("*.jsonl")) + list(corpus_dir.glob("*.tsv")))
    for path in paths:
        group_id, _ = session_path_info(path)
        sessions.append(load_transcript(path, rosters.get(group_id, ())))
    sessions.sort(key=lambda d: (d.group_id, d.week))
    return sessions
