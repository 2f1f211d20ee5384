"""End-to-end orchestration: config, stages, artifacts, manifest.

A pipeline run is driven by a JSON config file.  Paths in the config are
resolved relative to the config file's directory.  Every artifact embeds
a digest of the resolved config so tables and models produced under
different configurations cannot be mixed silently.

Stage order for ``run``:

    parse -> embedding -> extract -> aggregate -> analyze -> train -> evaluate

Each stage writes its outputs under ``output_dir`` before the next stage
starts, so a failed run keeps partial artifacts plus a ``FAILED`` marker.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import corpus as corpus_mod
from . import embedding as embedding_mod
from . import semantics
from .acoustics import (
    FrameFeatureSeries,
    NormalizationAccumulator,
    NormalizationStats,
    aggregate_segment,
    ingest_frame_features,
)
from .corpus import SessionDialog, load_corpus_dir
from .features import (
    ExtractionResources,
    SegmentFeatures,
    extract_segment_features,
    write_segment_features,
)
from .grouping import (
    GroupFeatureTable,
    GroupWeekRow,
    aggregate_group,
    load_marks_csv,
    load_topics_map,
)
from .predict import (
    dataset_from_table,
    default_search,
    derive_seed,
    evaluation_json,
    nested_cv,
    train_model,
)
from .stats import (
    emit_plot_data,
    normalize_weekly,
    screen_features,
    screening_report_json,
)

__all__ = [
    "ConfigError",
    "PipelineError",
    "PipelineConfig",
    "run_pipeline",
    "write_labels_csv",
    "load_labels_csv",
]

LogFn = Callable[..., None]


def _no_log(level: str, stage: str, **kv: object) -> None:
    return None


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""


class PipelineError(RuntimeError):
    """A pipeline stage failed after validation passed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


_REQUIRED_KEYS = (
    "corpus_dir",
    "glossary",
    "lexicon_english",
    "lexicon_chinese",
    "topics_map",
    "marks",
    "output_dir",
)

_PATH_KEYS = (
    "corpus_dir",
    "roster",
    "glossary",
    "lexicon_english",
    "lexicon_chinese",
    "translation",
    "embedding_corpus_dir",
    "embedding_table",
    "topics_map",
    "marks",
    "frames_dir",
)

_OPTIONAL_KEYS = (
    "roster",
    "translation",
    "translation_mode",
    "embedding_corpus_dir",
    "embedding_table",
    "frames_dir",
    "alpha",
    "bonferroni",
    "d_out",
    "classifier",
    "search",
    "seed",
    "keywords_top_k",
    "embedding",
)

_EMBEDDING_KEYS = (
    "dim",
    "window",
    "epochs",
    "min_count",
    "negatives",
    "lr_start",
    "lr_end",
)

_TRANSLATION_MODES = ("offline", "remote", "none")
_CLASSIFIERS = ("svm", "knn", "rf", "gnb")


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved, validated pipeline configuration.

    ``digest`` is the SHA-256 of the canonical raw config document and is
    embedded in every artifact the pipeline writes.
    """

    corpus_dir: Path
    glossary: Path
    lexicon_english: Path
    lexicon_chinese: Path
    topics_map: Path
    marks: Path
    output_dir: Path
    roster: Path | None = None
    translation: Path | None = None
    translation_mode: str = "offline"
    embedding_corpus_dir: Path | None = None
    embedding_table: Path | None = None
    frames_dir: Path | None = None
    alpha: float = 0.05
    bonferroni: bool = False
    d_out: int | None = None
    classifier: str = "svm"
    search: str = "random:30"
    seed: int = 0
    keywords_top_k: int = 10
    embedding: dict = field(default_factory=dict)
    digest: str = ""

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        base = Path(base_dir)
        known = set(_REQUIRED_KEYS) | set(_OPTIONAL_KEYS)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        missing = sorted(k for k in _REQUIRED_KEYS if raw.get(k) in (None, ""))
        if missing:
            raise ConfigError(f"missing required config key(s): {', '.join(missing)}")

        def path_of(key: str) -> Path | None:
            value = raw.get(key)
            if value in (None, ""):
                return None
            if not isinstance(value, str):
                raise ConfigError(f"config key {key!r} must be a path string")
            p = Path(value)
            return p if p.is_absolute() else base / p

        mode = raw.get("translation_mode")
        if mode is None:
            mode = "offline" if raw.get("translation") else "none"
        if mode not in _TRANSLATION_MODES:
            raise ConfigError(
                f"translation_mode must be one of {_TRANSLATION_MODES}, got {mode!r}"
            )
        if mode == "offline" and not raw.get("translation"):
            raise ConfigError("translation_mode 'offline' requires a translation path")

        classifier = raw.get("classifier", "svm")
        if classifier not in _CLASSIFIERS:
            raise ConfigError(
                f"classifier must be one of {_CLASSIFIERS}, got {classifier!r}"
            )

        alpha = float(raw.get("alpha", 0.05))
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {alpha}")

        d_out = raw.get("d_out")
        if d_out is not None:
            d_out = int(d_out)
            if d_out < 1:
                raise ConfigError(f"d_out must be >= 1, got {d_out}")

        top_k = int(raw.get("keywords_top_k", 10))
        if top_k < 1:
            raise ConfigError(f"keywords_top_k must be >= 1, got {top_k}")

        emb = raw.get("embedding", {})
        if not isinstance(emb, dict):
            raise ConfigError("config key 'embedding' must be an object")
        bad = sorted(set(emb) - set(_EMBEDDING_KEYS))
        if bad:
            raise ConfigError(f"unknown embedding key(s): {', '.join(bad)}")

        # Output location does not change what gets computed, so it stays
        # out of the digest; artifacts from one analysis config match no
        # matter where they were written.
        doc = {k: v for k, v in raw.items() if k != "output_dir"}
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()

        config = cls(
            corpus_dir=path_of("corpus_dir"),
            glossary=path_of("glossary"),
            lexicon_english=path_of("lexicon_english"),
            lexicon_chinese=path_of("lexicon_chinese"),
            topics_map=path_of("topics_map"),
            marks=path_of("marks"),
            output_dir=path_of("output_dir"),
            roster=path_of("roster"),
            translation=path_of("translation"),
            translation_mode=mode,
            embedding_corpus_dir=path_of("embedding_corpus_dir"),
            embedding_table=path_of("embedding_table"),
            frames_dir=path_of("frames_dir"),
            alpha=alpha,
            bonferroni=bool(raw.get("bonferroni", False)),
            d_out=d_out,
            classifier=classifier,
            search=str(raw.get("search", "random:30")),
            seed=int(raw.get("seed", 0)),
            keywords_top_k=top_k,
            embedding=dict(emb),
            digest=digest,
        )
        config.check_inputs()
        return config

    def check_inputs(self) -> None:
        """Fail before any stage runs if a referenced input is absent."""
        problems = []
        dirs = ("corpus_dir", "embedding_corpus_dir", "frames_dir")
        for key in _PATH_KEYS:
            value = getattr(self, key)
            if value is None:
                continue
            if not value.exists():
                problems.append(f"{key}: {value} does not exist")
            elif key in dirs and not value.is_dir():
                problems.append(f"{key}: {value} is not a directory")
            elif key not in dirs and not value.is_file():
                problems.append(f"{key}: {value} is not a file")
        if self.embedding_corpus_dir is None and self.embedding_table is None:
            problems.append(
                "one of embedding_corpus_dir or embedding_table is required"
            )
        if problems:
            raise ConfigError("; ".join(problems))

    def training_config(self) -> embedding_mod.TrainingConfig:
        return embedding_mod.TrainingConfig(
            **self.embedding, seed=derive_seed(self.seed, "embedding")
        )


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_labels_csv(path: str | Path, table: GroupFeatureTable, digest: str) -> None:
    """Write group_id,week,label rows for the train/evaluate commands."""
    lines = [f"# config_digest={digest}", "group_id,week,label"]
    for row in table.rows:
        if row.label is None:
            raise ValueError(f"row ({row.group_id}, week {row.week}) has no label")
        lines.append(f"{row.group_id},{row.week},{row.label.value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_labels_csv(path: str | Path) -> dict[tuple[str, int], str]:
    """Read a labels CSV into {(group_id, week): label string}."""
    out: dict[tuple[str, int], str] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0].strip() != "group_id,week,label":
        raise ValueError(f"{path}: expected header 'group_id,week,label'")
    for i, line in enumerate(rows[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}:{i}: expected 3 fields, got {len(parts)}")
        key = (parts[0], int(parts[1]))
        if key in out:
            raise ValueError(f"{path}:{i}: duplicate row for {key}")
        out[key] = parts[2]
    return out


@dataclass
class _RunState:
    """Mutable state threaded through the stages of one run."""

    config: PipelineConfig
    jobs: int
    log: LogFn
    dialogs: list[SessionDialog] = field(default_factory=list)
    table_emb: embedding_mod.EmbeddingTable | None = None
    keywords: dict[int, embedding_mod.KeywordSet] = field(default_factory=dict)
    records: dict[tuple[str, int], list[SegmentFeatures]] = field(default_factory=dict)
    feature_table: GroupFeatureTable | None = None
    normalized: GroupFeatureTable | None = None
    selected: list = field(default_factory=list)
    screening: object = None
    manifest: dict = field(default_factory=dict)


def _stage_parse(state: _RunState) -> dict:
    cfg = state.config
    state.dialogs = load_corpus_dir(cfg.corpus_dir, roster_path=cfg.roster)
    if not state.dialogs:
        raise ValueError(f"no transcripts found under {cfg.corpus_dir}")
    out_dir = cfg.output_dir / "parsed"
    out_dir.mkdir(parents=True, exist_ok=True)
    n_segments = 0
    for dialog in state.dialogs:
        name = f"{dialog.group_id}_week{dialog.week:02d}.jsonl"
        text = corpus_mod.serialize_transcript(dialog)
        (out_dir / name).write_text(text, encoding="utf-8")
        n_segments += len(dialog.segments)
    return {"sessions": len(state.dialogs), "segments": n_segments}


def _topic_documents(cfg: PipelineConfig) -> dict[int, list[str]]:
    week_to_topic = load_topics_map(cfg.topics_map)
    docs: dict[int, list[str]] = {}
    for week, topic_id in sorted(week_to_topic.items()):
        path = cfg.embedding_corpus_dir / f"{topic_id}.txt"
        if not path.is_file():
            raise FileNotFoundError(f"topic document not found: {path}")
        docs[week] = embedding_mod.tokenize(path.read_text(encoding="utf-8"))
    return docs


def _stage_embedding(state: _RunState) -> dict:
    cfg = state.config
    info: dict[str, object] = {}
    docs: dict[int, list[str]] = {}
    if cfg.embedding_corpus_dir is not None:
        docs = _topic_documents(cfg)

    if cfg.embedding_table is not None:
        state.table_emb = embedding_mod.EmbeddingTable.load(cfg.embedding_table)
        info["source"] = "pretrained"
    else:
        tc = cfg.training_config()
        state.table_emb, losses = embedding_mod.train_cbow(list(docs.values()), tc)
        info["source"] = "trained"
        info["epochs"] = len(losses)
        info["final_loss"] = losses[-1]
    state.table_emb.save(cfg.output_dir / "embedding.txt")
    info["vocabulary"] = len(state.table_emb)

    if docs:
        for week in docs:
            state.keywords[week] = embedding_mod.tfidf_keywords(
                docs, week, top_k=cfg.keywords_top_k
            )
        payload = {
            str(week): [[t, w] for t, w in ks.keywords]
            for week, ks in sorted(state.keywords.items())
        }
        blob = json.dumps(
            {"config_digest": cfg.digest, "keywords": payload},
            indent=2,
            sort_keys=True,
        )
        (cfg.output_dir / "keywords.json").write_text(blob + "\n", encoding="utf-8")
    info["weeks_with_keywords"] = len(state.keywords)
    return info


def _frame_series_for(cfg: PipelineConfig, dialog: SessionDialog) -> FrameFeatureSeries | None:
    if cfg.frames_dir is None:
        return None
    path = cfg.frames_dir / f"{dialog.group_id}_week{dialog.week:02d}.csv"
    if not path.is_file():
        return None
    return ingest_frame_features(path)


def _stage_extract(state: _RunState) -> dict:
    cfg = state.config
    glossary = semantics.load_glossary(cfg.glossary)
    lex_en = semantics.load_lexicon(cfg.lexicon_english, "english")
    lex_zh = semantics.load_lexicon(cfg.lexicon_chinese, "chinese")
    if cfg.translation_mode == "offline":
        translator = semantics.load_translation_lexicon(cfg.translation)
    elif cfg.translation_mode == "remote":
        translator = semantics.RemoteTranslator()
    else:
        translator = semantics.IdentityTranslator()

    frame_series: dict[tuple[str, int], FrameFeatureSeries] = {}
    stats: NormalizationStats | None = None
    if cfg.frames_dir is not None:
        for dialog in state.dialogs:
            series = _frame_series_for(cfg, dialog)
            if series is not None:
                frame_series[(dialog.group_id, dialog.week)] = series
        if frame_series:
            acc = NormalizationAccumulator()
            for dialog in state.dialogs:
                series = frame_series.get((dialog.group_id, dialog.week))
                if series is None:
                    continue
                for seg in dialog.segments:
                    acc.add(seg.speaker, aggregate_segment(series, seg))
            stats = acc.finalize()
            stats.save(cfg.output_dir / "norm_stats.json")

    out_dir = cfg.output_dir / "features"
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(dialog: SessionDialog) -> tuple[tuple[str, int], list[SegmentFeatures], dict]:
        key = (dialog.group_id, dialog.week)
        resources = ExtractionResources(
            keywords=state.keywords.get(dialog.week),
            table=state.table_emb,
            translator=translator,
            english_lexicon=lex_en,
            chinese_lexicon=lex_zh,
            glossary=glossary,
            frame_features=frame_series.get(key),
            normalization=stats,
        )
        records, summary = extract_segment_features(dialog, resources)
        return key, records, summary.missing

    missing_totals: dict[str, int] = {}
    if state.jobs > 1:
        with ThreadPoolExecutor(max_workers=state.jobs) as pool:
            results = list(pool.map(one, state.dialogs))
    else:
        results = [one(d) for d in state.dialogs]
    for key, records, missing in results:
        state.records[key] = records
        for name, count in missing.items():
            missing_totals[name] = missing_totals.get(name, 0) + count
        name = f"{key[0]}_week{key[1]:02d}.jsonl"
        write_segment_features(out_dir / name, records)
    for name, count in sorted(missing_totals.items()):
        state.log("warn", "extract", missing=name, segments=count)
    return {"sessions": len(results), "missing": missing_totals}


def _stage_aggregate(state: _RunState) -> dict:
    cfg = state.config
    rows = []
    for dialog in state.dialogs:
        key = (dialog.group_id, dialog.week)
        values = aggregate_group(state.records[key], dialog.roster)
        rows.append(GroupWeekRow(group_id=dialog.group_id, week=dialog.week, values=values))
    table = GroupFeatureTable(tuple(rows))
    marks = load_marks_csv(cfg.marks)
    state.feature_table = table.with_outcomes(marks)
    state.feature_table.save(cfg.output_dir / "features_table.csv", cfg.digest)
    write_labels_csv(cfg.output_dir / "labels.csv", state.feature_table, cfg.digest)
    return {
        "rows": len(state.feature_table.rows),
        "columns": len(state.feature_table.columns()),
    }


def _stage_analyze(state: _RunState) -> dict:
    cfg = state.config
    state.normalized, report = normalize_weekly(state.feature_table)
    state.normalized.save(cfg.output_dir / "normalized_table.csv", cfg.digest)
    if report.degenerate:
        state.log("warn", "analyze", degenerate_columns=len(report.degenerate))
    state.screening = screen_features(
        state.normalized, alpha=cfg.alpha, bonferroni=cfg.bonferroni
    )
    blob = screening_report_json(state.screening, cfg.digest)
    (cfg.output_dir / "screening.json").write_text(blob, encoding="utf-8")
    state.selected = list(state.screening.selected)
    if state.selected:
        keep = set(state.selected)
        rows = tuple(
            GroupWeekRow(
                group_id=r.group_id,
                week=r.week,
                values={k: v for k, v in r.values.items() if k in keep},
                outcome=r.outcome,
                rank=r.rank,
                label=r.label,
            )
            for r in state.normalized.rows
        )
        GroupFeatureTable(rows).save(
            cfg.output_dir / "selected_features.csv", cfg.digest
        )
        emit_plot_data(
            state.normalized, state.selected, cfg.output_dir / "plots", cfg.digest
        )
    return {
        "tested": len(state.screening.screens),
        "selected": len(state.selected),
        "alpha": cfg.alpha,
    }


def _stage_train(state: _RunState) -> dict:
    cfg = state.config
    if not state.selected:
        raise ValueError("screening selected no features; nothing to train on")
    dataset, imputation = dataset_from_table(state.normalized, state.selected)
    search = default_search(cfg.classifier, cfg.search)
    model = train_model(
        dataset,
        imputation,
        search,
        seed=derive_seed(cfg.seed, "train"),
        d_out=cfg.d_out,
    )
    model.save(cfg.output_dir / "model.json", cfg.digest)
    return {
        "features": dataset.d,
        "rows": dataset.n,
        "classifier": cfg.classifier,
        "chosen": dict(model.hyperparams.values),
    }


def _stage_evaluate(state: _RunState) -> dict:
    cfg = state.config
    dataset, _ = dataset_from_table(state.normalized, state.selected)
    search = default_search(cfg.classifier, cfg.search)
    result = nested_cv(
        dataset,
        search,
        seed=derive_seed(cfg.seed, "eval"),
        d_out=cfg.d_out,
    )
    blob = evaluation_json(result, cfg.digest)
    (cfg.output_dir / "evaluation.json").write_text(blob, encoding="utf-8")
    return {
        "mean_accuracy": result.mean_accuracy,
        "pooled_accuracy": result.pooled_accuracy,
    }


_STAGES = (
    ("parse", _stage_parse),
    ("embedding", _stage_embedding),
    ("extract", _stage_extract),
    ("aggregate", _stage_aggregate),
    ("analyze", _stage_analyze),
    ("train", _stage_train),
    ("evaluate", _stage_evaluate),
)


def _input_digests(cfg: PipelineConfig) -> dict[str, str]:
    digests: dict[str, str] = {}
    for key in _PATH_KEYS:
        value = getattr(cfg, key)
        if value is None:
            continue
        if value.is_file():
            digests[key] = _sha256_file(value)
        elif value.is_dir():
            files = sorted(p for p in value.rglob("*") if p.is_file())
            h = hashlib.sha256()
            for p in files:
                h.update(p.name.encode("utf-8"))
                h.update(bytes.fromhex(_sha256_file(p)))
            digests[key] = h.hexdigest()
    return digests


def run_pipeline(
    config: PipelineConfig,
    jobs: int = 1,
    log: LogFn = _no_log,
    until: str | None = None,
) -> dict:
    """Run stages in order (optionally stopping after ``until``).

    Returns the manifest dictionary. On stage failure, partial outputs
    stay in place, a ``FAILED`` marker and the manifest are written, and
    PipelineError is raised.
    """
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    stage_names = [name for name, _ in _STAGES]
    if until is not None and until not in stage_names:
        raise ConfigError(f"unknown stage {until!r}; expected one of {stage_names}")
    config.output_dir.mkdir(parents=True, exist_ok=True)
    failed_marker = config.output_dir / "FAILED"
    if failed_marker.exists():
        failed_marker.unlink()

    import numpy

    from . import __version__

    manifest: dict = {
        "package_version": __version__,
        "python_version": sys.version.split()[0],
        "numpy_version": numpy.__version__,
        "config_digest": config.digest,
        "seed": config.seed,
        "jobs": jobs,
        "input_digests": _input_digests(config),
        "stages": [],
        "failed_stage": None,
    }
    state = _RunState(config=config, jobs=jobs, log=log)
    state.manifest = manifest

    def flush() -> None:
        blob = json.dumps(manifest, indent=2, sort_keys=True)
        (config.output_dir / "manifest.json").write_text(blob + "\n", encoding="utf-8")

    for name, fn in _STAGES:
        log("info", name, status="start")
        t0 = time.perf_counter()
        try:
            info = fn(state)
        except Exception as exc:
            manifest["failed_stage"] = name
            manifest["error"] = str(exc)
            flush()
            failed_marker.write_text(f"{name}: {exc}\n", encoding="utf-8")
            log("error", name, error=str(exc))
            raise PipelineError(name, str(exc)) from exc
        seconds = time.perf_counter() - t0
        entry = {"name": name, "seconds": round(seconds, 3)}
        entry.update({k: v for k, v in info.items()})
        manifest["stages"].append(entry)
        kv = {k: v for k, v in info.items() if not isinstance(v, dict)}
        log("info", name, status="done", seconds=round(seconds, 3), **kv)
        if name == until:
            break

    flush()
    return manifest
