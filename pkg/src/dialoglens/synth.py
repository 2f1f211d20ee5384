"""Synthetic corpora with known planted structure.

The real study corpus is private, so verification runs on generated
data instead: a table-level generator plants feature-outcome
correlations of controlled strength directly into a group feature
table, and a corpus-level generator writes a complete runnable corpus
(transcripts, roster, marks, topic documents, lexicons, config) whose
dialog statistics carry the plants. Audio synthesis covers the
alignment and lecture-split paths. Everything is deterministic given
the spec's seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .audiosync import AudioTrack, WindowLabel
from .grouping import (
    AGGREGATIONS,
    GroupFeatureTable,
    GroupMarks,
    GroupWeekRow,
)
from .semantics import TABLE_CATEGORIES
from .predict import derive_seed


def _marks_from_latent(z: np.ndarray, groups: Sequence[str]) -> dict[str, GroupMarks]:
    """Exam marks whose outcome score increases affinely with z."""
    target = np.clip(0.62 + 0.13 * z, 0.05, 0.98)
    marks = {}
    for g, t in zip(groups, target):
        pts = float(round(1000 * t)) / 10.0
        marks[g] = GroupMarks(pts, 100.0, pts, 100.0)
    return marks


def _check_strength(strength: float) -> None:
    if not math.isfinite(strength):
        raise ValueError("plant strength must be finite")
    if abs(strength) > 1.0:
        raise ValueError(f"plant strength {strength} implies correlation > 1")


@dataclass(frozen=True)
class PlantedTable:
    """A feature table with known signal columns."""

    table: GroupFeatureTable
    planted: tuple[str, ...]
    noise: tuple[str, ...]
    marks: Mapping[str, GroupMarks]
    latent: Mapping[str, float]


def planted_table(
    groups: int = 10,
    weeks: int = 9,
    n_planted: int = 5,
    n_noise: int = 50,
    strength: float = 0.7,
    seed: int = 0,
) -> PlantedTable:
    """Plant signal columns directly into a group feature table.

    Each group g draws a latent quality z_g; outcomes derive from z_g,
    and each planted column is strength * z_g plus matched noise, so
    its population correlation with the outcome is the given strength.
    Noise columns are independent standard normals.
    """
    _check_strength(strength)
    if groups < 3 or weeks < 1:
        raise ValueError("need at least 3 groups and 1 week")
    rng = np.random.default_rng(seed)
    group_ids = [f"G{i + 1:02d}" for i in range(groups)]
    # Three separated quality levels sized like the outcome bands,
    # shuffled per seed: which group sits in which band varies, but no
    # two groups are near-tied at a band boundary by accident of the
    # draw, so the planted signal is genuinely recoverable.
    k = math.ceil(0.3 * groups)
    z = np.array([1.0] * k + [0.0] * (groups - 2 * k) + [-1.0] * k)
    z = (z - z.mean()) / z.std()
    rng.shuffle(z)
    marks = _marks_from_latent(z, group_ids)

    planted = tuple(f"Planted{i + 1:02d}" for i in range(n_planted))
    noise = tuple(f"Noise{i + 1:02d}" for i in range(n_noise))
    mix = math.sqrt(1.0 - strength * strength)
    rows = []
    for gi, g in enumerate(group_ids):
        for w in range(1, weeks + 1):
            values = {}
            for name in planted:
                values[name] = strength * z[gi] + mix * float(rng.normal())
            for name in noise:
                values[name] = float(rng.normal())
            rows.append(GroupWeekRow(g, w, values))
    table = GroupFeatureTable(tuple(rows)).with_outcomes(marks)
    latent = {g: float(z[i]) for i, g in enumerate(group_ids)}
    return PlantedTable(table, planted, noise, marks, latent)


@dataclass(frozen=True)
class Plant:
    """One planted dialog statistic: table column, direction, strength."""

    feature: str
    direction: int
    strength: float

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        _check_strength(self.strength)
        base, agg = split_plant_feature(self.feature)
        if agg not in ("DialogSum", "DialogMean"):
            raise ValueError(f"cannot realize aggregation {agg!r} in generated dialogs")
        if base not in _COUNT_POOLS:
            raise ValueError(
                f"cannot realize feature {base!r}; choose from {sorted(_COUNT_POOLS)}"
            )


def split_plant_feature(name: str) -> tuple[str, str]:
    """Split a table column name into (segment feature, aggregation)."""
    base, _, agg = name.rpartition("_")
    if not base or agg not in AGGREGATIONS:
        raise ValueError(f"{name!r} is not a '<feature>_<aggregation>' column name")
    return base, agg


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape and plants of a generated corpus."""

    groups: int = 6
    weeks: int = 4
    students_per_group: int = 4
    mean_segments: float = 30.0
    plants: tuple[Plant, ...] = ()
    noise_level: float = 1.0
    seed: int = 0
    with_frames: bool = False

    def __post_init__(self):
        if self.groups < 3:
            raise ValueError("need at least 3 groups")
        if self.weeks < 1:
            raise ValueError("need at least 1 week")
        if not 2 <= self.students_per_group <= 8:
            raise ValueError("students per group must be in [2, 8]")
        if self.mean_segments < 10:
            raise ValueError("mean segments must be >= 10")
        if self.noise_level < 0:
            raise ValueError("noise level must be >= 0")


# Word pools. Planted counts are realized by inserting pool words, so
# each countable pool must be disjoint from the fillers and from the
# other pools.
_MATH_TERMS_EN = ("matrix", "eigenvalue", "determinant", "laplace transform", "integral")
_MATH_TERMS_ZH = ("矩陣", "特徵值", "行列式")
_PE_WORDS = ("good", "great", "happy", "nice", "fun")
_NE_WORDS = ("bad", "hard", "wrong", "sad")
_ASSENT_WORDS = ("yes", "agree", "right")
_FILLER_EN = (
    "we", "so", "think", "maybe", "just", "like", "then", "should", "this",
    "that", "can", "try", "what", "how", "answer", "question", "step", "part",
    "first", "next", "check", "solve", "write", "here",
)
_FILLER_ZH = ("嗯", "那", "這", "是", "有", "再", "看", "做")
_SHARED_MATH = ("equation", "function", "variable", "theorem", "proof",
                "formula", "derivative", "limit", "series", "vector")

_COUNT_POOLS: dict[str, tuple[str, ...]] = {
    "MathTerms": _MATH_TERMS_EN + _MATH_TERMS_ZH,
    "PE": _PE_WORDS,
    "NE": _NE_WORDS,
    "Assent": _ASSENT_WORDS,
}


def _topic_words(week: int) -> list[str]:
    return [f"topic{week:02d}kw{k}" for k in range(1, 9)]


def _roster_labels(count: int) -> list[str]:
    labels = []
    for i in range(count):
        gender = "M" if i % 2 == 0 else "F"
        labels.append(f"S{gender}{i + 1}")
    return labels


def _dialog_lines(
    rng: np.random.Generator,
    roster: list[str],
    week: int,
    planted_counts: Mapping[str, int],
    n_segments: int,
) -> list[dict]:
    """Build one session's segment records with planted token counts."""
    # distribute each planted dialog total across segments
    per_segment: dict[str, np.ndarray] = {}
    for base, total in planted_counts.items():
        per_segment[base] = rng.multinomial(total, np.full(n_segments, 1.0 / n_segments))

    topic_pool = _topic_words(week)
    records = []
    t = float(rng.uniform(0.0, 2.0))
    prev_speaker = None
    for s in range(n_segments):
        roll = rng.random()
        if roll < 0.05:
            speaker = "P"
        elif roll < 0.08:
            speaker = "TM1"
        elif roll < 0.10:
            speaker = "OM1"
        else:
            speaker = roster[int(rng.integers(len(roster)))]

        duration = float(np.clip(rng.lognormal(1.4, 0.5), 1.5, 20.0))
        rate = float(rng.normal(170.0, 60.0))  # tokens per minute, spans S/N/F
        budget = max(3, int(round(max(rate, 30.0) * duration / 60.0)))

        tokens: list[str] = []
        for base, counts in per_segment.items():
            pool = _COUNT_POOLS[base]
            for _ in range(int(counts[s])):
                tokens.append(pool[int(rng.integers(len(pool)))])
        n_topic = int(rng.integers(0, 4))
        for _ in range(n_topic):
            tokens.append(topic_pool[int(rng.integers(len(topic_pool)))])
        while len(tokens) < budget:
            if rng.random() < 0.25:
                tokens.append(_FILLER_ZH[int(rng.integers(len(_FILLER_ZH)))])
            elif rng.random() < 0.2:
                tokens.append(_SHARED_MATH[int(rng.integers(len(_SHARED_MATH)))])
            else:
                tokens.append(_FILLER_EN[int(rng.integers(len(_FILLER_EN)))])
        perm = rng.permutation(len(tokens))
        text = " ".join(tokens[i] for i in perm)

        if prev_speaker == speaker:
            t += float(rng.uniform(1.1, 3.0))
        elif s > 0:
            t += float(rng.uniform(0.1, 0.9))
        records.append(
            {
                "start": round(t, 2),
                "end": round(t + duration, 2),
                "speaker": speaker,
                "text": text,
            }
        )
        t += duration
        prev_speaker = speaker

    # strict roster validation requires every student to be heard; hand
    # surplus turns (most talkative donor first) to anyone left silent
    heard: dict[str, int] = {}
    for r in records:
        heard[r["speaker"]] = heard.get(r["speaker"], 0) + 1
    for name in roster:
        if name in heard:
            continue
        donor = max(
            range(len(records)),
            key=lambda i: (
                heard[records[i]["speaker"]],
                records[i]["speaker"] not in roster,
            ),
        )
        heard[records[donor]["speaker"]] -= 1
        records[donor]["speaker"] = name
        heard[name] = 1
    return records


def _topic_document(rng: np.random.Generator, week: int) -> str:
    """A textbook-style passage dominated by the week's keywords."""
    words = []
    pool = _topic_words(week)
    for kw in pool:
        words += [kw] * int(rng.integers(6, 12))
    for w in _SHARED_MATH:
        words += [w] * int(rng.integers(2, 5))
    for w in _MATH_TERMS_EN:
        words += [w] * int(rng.integers(1, 3))
    for w in _FILLER_EN:
        words += [w] * int(rng.integers(2, 6))
    perm = rng.permutation(len(words))
    return " ".join(words[i] for i in perm)


def _frame_rows(rng: np.random.Generator, duration: float, male: bool) -> list[str]:
    rows = []
    t = 0.0
    f0_mu = 120.0 if male else 210.0
    while t < duration:
        if rng.random() < 0.7:
            f0 = f"{np.clip(rng.normal(f0_mu, 20.0), 55.0, 580.0):.2f}"
        else:
            f0 = ""
        energy = f"{rng.lognormal(-2.0, 0.8):.6f}"
        rows.append(f"{t:.2f},{f0},{energy}")
        t = round(t + 0.05, 2)
    return rows


DEMO_TRANSLATIONS = (
    ("特徵值", "eigenvalue"), ("行列式", "determinant"), ("矩陣", "matrix"),
    ("嗯", "um"), ("那", "then"), ("這", "this"), ("是", "is"),
    ("有", "have"), ("再", "again"), ("看", "look"), ("做", "do"),
)


def generate_corpus(spec: SyntheticSpec, out_dir: Union[str, Path]) -> dict:
    """Write a complete runnable corpus; returns the plant manifest.

    Layout under out_dir: transcripts/*.jsonl, roster.json, marks.csv,
    topics_map.csv, topics/*.txt, glossary.txt, lexicon_{en,zh}.dic,
    translation.tsv, optional frames/*.csv, config.json, and
    plant_manifest.json with the ground truth.
    """
    out = Path(out_dir)
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    (out / "topics").mkdir(exist_ok=True)
    if spec.with_frames:
        (out / "frames").mkdir(exist_ok=True)

    group_ids = [f"G{i + 1:02d}" for i in range(spec.groups)]
    rng_master = np.random.default_rng(spec.seed)
    z = rng_master.normal(size=spec.groups)
    z = (z - z.mean()) / z.std()
    marks = _marks_from_latent(z, group_ids)

    roster_labels = _roster_labels(spec.students_per_group)
    roster = {g: roster_labels for g in group_ids}
    (out / "roster.json").write_text(
        json.dumps(roster, indent=2, sort_keys=True), "utf-8"
    )

    with (out / "marks.csv").open("w", encoding="utf-8") as fh:
        fh.write("group_id,midterm,midterm_full,final,final_full\n")
        for g in group_ids:
            m = marks[g]
            fh.write(f"{g},{m.midterm!r},{m.midterm_full!r},{m.final!r},{m.final_full!r}\n")

    with (out / "topics_map.csv").open("w", encoding="utf-8") as fh:
        fh.write("week,topic_id\n")
        for w in range(1, spec.weeks + 1):
            fh.write(f"{w},T{w:02d}\n")

    for w in range(1, spec.weeks + 1):
        doc_rng = np.random.default_rng(derive_seed(spec.seed, "topic", w))
        (out / "topics" / f"T{w:02d}.txt").write_text(_topic_document(doc_rng, w), "utf-8")

    glossary_lines = ["# demo glossary"] + sorted(_MATH_TERMS_EN + _MATH_TERMS_ZH)
    (out / "glossary.txt").write_text("\n".join(glossary_lines) + "\n", "utf-8")

    (out / "lexicon_en.dic").write_text(_demo_lexicon_en(), "utf-8")
    (out / "lexicon_zh.dic").write_text(_demo_lexicon_zh(), "utf-8")
    (out / "translation.tsv").write_text(
        "\n".join(f"{zh}\t{en}" for zh, en in DEMO_TRANSLATIONS) + "\n", "utf-8"
    )

    # per (group, week): latent-driven planted totals, then transcripts
    mix = {p.feature: math.sqrt(1.0 - p.strength**2) for p in spec.plants}
    for gi, g in enumerate(group_ids):
        for w in range(1, spec.weeks + 1):
            rng = np.random.default_rng(derive_seed(spec.seed, "dialog", g, w))
            n_segments = max(10, int(rng.poisson(spec.mean_segments)))
            planted_counts = {}
            for p in spec.plants:
                base, agg = split_plant_feature(p.feature)
                latent = p.direction * p.strength * z[gi] + mix[p.feature] * float(
                    rng.normal(0.0, spec.noise_level)
                )
                mu = 0.4 * n_segments
                if agg == "DialogSum":
                    total = mu * (1.0 + 0.5 * latent)
                else:  # DialogMean scales with the per-segment average
                    total = mu * (1.0 + 0.5 * latent)
                planted_counts[base] = int(max(0, round(total)))
            records = _dialog_lines(rng, roster_labels, w, planted_counts, n_segments)
            path = out / "transcripts" / f"{g}_week{w:02d}.jsonl"
            with path.open("w", encoding="utf-8") as fh:
                for r in records:
                    fh.write(json.dumps(r, ensure_ascii=False) + "\n")
            if spec.with_frames:
                frame_rng = np.random.default_rng(derive_seed(spec.seed, "frames", g, w))
                duration = records[-1]["end"] + 1.0
                rows = _frame_rows(frame_rng, duration, male=gi % 2 == 0)
                (out / "frames" / f"{g}_week{w:02d}.csv").write_text(
                    "time,F0,Energy\n" + "\n".join(rows) + "\n", "utf-8"
                )

    config = {
        "corpus_dir": "transcripts",
        "roster": "roster.json",
        "glossary": "glossary.txt",
        "lexicon_english": "lexicon_en.dic",
        "lexicon_chinese": "lexicon_zh.dic",
        "translation": "translation.tsv",
        "translation_mode": "offline",
        "embedding_corpus_dir": "topics",
        "topics_map": "topics_map.csv",
        "marks": "marks.csv",
        "frames_dir": "frames" if spec.with_frames else None,
        "output_dir": "out",
        "alpha": 0.05,
        "d_out": None,
        "classifier": "svm",
        "search": "grid",
        "seed": spec.seed,
        "keywords_top_k": 8,
        "embedding": {"dim": 32, "window": 4, "epochs": 3, "min_count": 2},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True), "utf-8")

    manifest = {
        "seed": spec.seed,
        "groups": group_ids,
        "weeks": spec.weeks,
        "plants": [
            {"feature": p.feature, "direction": p.direction, "strength": p.strength}
            for p in spec.plants
        ],
        "latent": {g: float(z[i]) for i, g in enumerate(group_ids)},
        "outcome": {g: marks[g].score() for g in group_ids},
    }
    (out / "plant_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), "utf-8"
    )
    return manifest


def verify_plants(table: GroupFeatureTable, manifest: Mapping) -> dict[str, float]:
    """Post-hoc correlation of each planted column with the outcome."""
    from .stats import pearson

    out = {}
    for plant in manifest["plants"]:
        name = plant["feature"]
        rows = [r for r in table.rows if name in r.values and r.outcome is not None]
        xs = [r.values[name] for r in rows]
        ys = [r.outcome for r in rows]
        out[name] = pearson(xs, ys).r
    return out


def _demo_lexicon_en() -> str:
    lines = ["%"]
    for i, name in enumerate(TABLE_CATEGORIES, start=1):
        lines.append(f"{i}\t{name}")
    lines.append("%")
    pe = TABLE_CATEGORIES.index("PE") + 1
    ne = TABLE_CATEGORIES.index("NE") + 1
    assent = TABLE_CATEGORIES.index("Assent") + 1
    affect = TABLE_CATEGORIES.index("Affect") + 1
    for w in _PE_WORDS:
        lines.append(f"{w}\t{pe} {affect}")
    for w in _NE_WORDS:
        lines.append(f"{w}\t{ne} {affect}")
    for w in _ASSENT_WORDS:
        lines.append(f"{w}\t{assent}")
    lines.append(f"think\t{TABLE_CATEGORIES.index('Insight') + 1}")
    lines.append(f"because\t{TABLE_CATEGORIES.index('Caus') + 1}")
    lines.append(f"and\t{TABLE_CATEGORIES.index('Conj') + 1}")
    lines.append(f"maybe\t{TABLE_CATEGORIES.index('Tent') + 1}")
    lines.append(f"what\t{TABLE_CATEGORIES.index('QU') + 1}")
    return "\n".join(lines) + "\n"


def _demo_lexicon_zh() -> str:
    lines = ["%"]
    for i, name in enumerate(TABLE_CATEGORIES, start=1):
        lines.append(f"{i}\t{name}")
    lines.append("%")
    lines.append(f"嗯\t{TABLE_CATEGORIES.index('Filler') + 1}")
    lines.append(f"是\t{TABLE_CATEGORIES.index('Assent') + 1}")
    lines.append(f"有\t{TABLE_CATEGORIES.index('Cert') + 1}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SyntheticTracks:
    """Aligned-truth multi-track audio with planted lecture spans."""

    tracks: tuple[AudioTrack, ...]
    offsets_s: tuple[float, ...]
    lecture_spans: tuple[tuple[float, float], ...]
    duration_s: float

    def true_labels(self, window_s: float, hop_s: float) -> list[WindowLabel]:
        """Expected label per analysis window on the aligned timeline."""
        n_windows = int((self.duration_s - window_s) // hop_s) + 1
        labels = []
        for w in range(n_windows):
            start = w * hop_s
            end = start + window_s
            overlap = sum(
                max(0.0, min(end, e) - max(start, s)) for s, e in self.lecture_spans
            )
            labels.append(
                WindowLabel.LECTURE if overlap >= window_s / 2 else WindowLabel.DISCUSSION
            )
        return labels


def _modulated_noise(rng: np.random.Generator, n: int, rate: float) -> np.ndarray:
    """Speech-like carrier: white noise under a slow random envelope."""
    carrier = rng.normal(size=n)
    n_ctrl = max(2, int(n / rate * 4) + 1)  # ~4 Hz envelope variation
    ctrl = np.abs(rng.normal(0.6, 0.4, size=n_ctrl)) + 0.05
    envelope = np.interp(np.arange(n), np.linspace(0, n - 1, n_ctrl), ctrl)
    return carrier * envelope


def generate_session_tracks(
    n_tracks: int = 3,
    duration_s: float = 120.0,
    lecture_spans: Sequence[tuple[float, float]] = ((20.0, 50.0), (90.0, 110.0)),
    offsets_s: Sequence[float] | None = None,
    snr_db: float = 10.0,
    sample_rate: float = 8000.0,
    seed: int = 0,
) -> SyntheticTracks:
    """Multi-track session audio: shared lecture, independent discussion.

    Track i is delayed by offsets_s[i] (leading silence), carries the
    common lecture signal inside the planted spans and its own
    discussion signal elsewhere, plus white noise at snr_db.
    """
    if n_tracks < 2:
        raise ValueError("need at least two tracks")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    lecture = _modulated_noise(rng, n, sample_rate)
    mask = np.zeros(n, dtype=bool)
    for s, e in lecture_spans:
        mask[int(s * sample_rate) : int(e * sample_rate)] = True

    if offsets_s is None:
        offsets_s = tuple(float(round(rng.uniform(0.0, 5.0), 3)) for _ in range(n_tracks))
    offsets_s = tuple(float(o) for o in offsets_s)
    if len(offsets_s) != n_tracks or any(o < 0 for o in offsets_s):
        raise ValueError("need one non-negative offset per track")

    noise_scale = 10.0 ** (-snr_db / 20.0)
    tracks = []
    for i in range(n_tracks):
        own = _modulated_noise(rng, n, sample_rate)
        clean = np.where(mask, lecture, own)
        signal_rms = float(np.sqrt(np.mean(clean**2)))
        noisy = clean + rng.normal(0.0, noise_scale * signal_rms, size=n)
        pad = np.zeros(int(round(offsets_s[i] * sample_rate)))
        samples = np.concatenate([pad, noisy])
        peak = float(np.abs(samples).max())
        tracks.append(AudioTrack(samples / (1.05 * peak), sample_rate))
    return SyntheticTracks(
        tuple(tracks), offsets_s, tuple(tuple(s) for s in lecture_spans), duration_s
    )
