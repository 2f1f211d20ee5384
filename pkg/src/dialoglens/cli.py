"""Command line interface.

Subcommands: split, parse, extract, aggregate, analyze, train,
evaluate, synth, run.  Exit codes: 0 success, 2 invalid input or
configuration, 3 processing failure after validation passed.

Progress goes to stderr, one line per event, in the form

    <level> <stage> key=value key=value ...
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import warnings
from pathlib import Path

from . import audiosync
from .corpus import TranscriptError
from .grouping import DIGEST_COMMENT, GroupFeatureTable, OutcomeLabel, load_marks_csv
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    load_labels_csv,
    run_pipeline,
    write_labels_csv,
)
from .predict import (
    TrainedModel,
    dataset_from_table,
    default_search,
    evaluate_model,
    evaluation_json,
    train_model,
)
from .stats import emit_plot_data, normalize_weekly, screen_features, screening_report_json
from .synth import Plant, SyntheticSpec, generate_corpus

__all__ = ["main"]


def log(level: str, stage: str, **kv: object) -> None:
    parts = [f"{k}={v}" for k, v in kv.items()]
    print(" ".join([level, stage] + parts), file=sys.stderr)


class CliInputError(ValueError):
    """Bad command input discovered before processing started."""


def _read_table(path: str) -> tuple[GroupFeatureTable, str]:
    """Load a feature table plus the digest to stamp on derived artifacts.

    The digest propagates from the table's own comment when present so
    downstream artifacts stay tied to the originating configuration;
    otherwise it is the SHA-256 of the file bytes.
    """
    p = Path(path)
    if not p.is_file():
        raise CliInputError(f"feature table not found: {p}")
    text = p.read_text(encoding="utf-8")
    if text.startswith(DIGEST_COMMENT):
        digest = text.splitlines()[0][len(DIGEST_COMMENT):].strip()
    else:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return GroupFeatureTable.from_csv(text), digest


def _attach_labels(table: GroupFeatureTable, labels_path: str) -> GroupFeatureTable:
    p = Path(labels_path)
    if not p.is_file():
        raise CliInputError(f"labels file not found: {p}")
    labels = load_labels_csv(p)
    rows = []
    for row in table.rows:
        key = (row.group_id, row.week)
        if key not in labels:
            raise CliInputError(f"no label for group {key[0]} week {key[1]}")
        rows.append(dataclasses.replace(row, label=OutcomeLabel(labels[key])))
    extra = sorted(set(labels) - {(r.group_id, r.week) for r in table.rows})
    if extra:
        raise CliInputError(f"labels for rows not in the table: {extra[:5]}")
    return GroupFeatureTable(tuple(rows))


def _feature_columns(table: GroupFeatureTable) -> list[str]:
    cols = table.columns()
    if not cols:
        raise CliInputError("feature table has no feature columns")
    return cols


def cmd_parse(args: argparse.Namespace) -> int:
    from .corpus import load_corpus_dir, serialize_transcript

    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise CliInputError(f"not a directory: {in_dir}")
    dialogs = load_corpus_dir(in_dir, roster_path=args.roster)
    if not dialogs:
        raise CliInputError(f"no transcripts found under {in_dir}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for dialog in dialogs:
        name = f"{dialog.group_id}_week{dialog.week:02d}.jsonl"
        (out / name).write_text(serialize_transcript(dialog), encoding="utf-8")
        log(
            "info",
            "parse",
            session=f"{dialog.group_id}/week{dialog.week:02d}",
            segments=len(dialog.segments),
        )
    log("info", "parse", sessions=len(dialogs), out=out)
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    session_dir = Path(args.session_dir)
    if not session_dir.is_dir():
        raise CliInputError(f"not a directory: {session_dir}")
    paths = sorted(session_dir.glob("*.wav"))
    if len(paths) < 2:
        raise CliInputError(f"need at least two .wav tracks, found {len(paths)}")
    tracks = [audiosync.load_wav(p) for p in paths]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    offsets = [0.0]
    for path, track in zip(paths[1:], tracks[1:]):
        est = audiosync.estimate_offset(tracks[0], track, max_lag_s=args.max_lag)
        offsets.append(est.offset_s)
        log(
            "info",
            "split",
            track=path.name,
            offset_s=round(est.offset_s, 4),
            cosine=round(est.peak_cosine, 4),
            low_confidence=est.low_confidence,
        )

    # Align: drop each track's lead relative to the earliest content,
    # then cut all tracks to the shortest aligned duration.
    base = min(offsets)
    rate = tracks[0].sample_rate
    aligned = []
    for track, off in zip(tracks, offsets):
        lead = int(round((off - base) * rate))
        aligned.append(audiosync.AudioTrack(track.samples[lead:], rate))
    common = min(t.samples.size for t in aligned)
    if common < int(round(args.window * rate)):
        raise CliInputError("aligned tracks are shorter than one window")
    aligned = [audiosync.AudioTrack(t.samples[:common], rate) for t in aligned]

    profile = audiosync.similarity_profile(
        aligned, window_s=args.window, hop_s=args.hop, search_radius_s=args.radius
    )
    decision = audiosync.threshold_profile(profile)
    summary = {
        "tracks": [p.name for p in paths],
        "offsets_s": offsets,
        "threshold": decision.threshold,
        "windows": profile.n_windows,
    }
    lecture_windows = []
    for path, track, labels in zip(paths, aligned, decision.labels):
        kept, spans = audiosync.excise_lecture(track, labels, args.window, args.hop)
        stem = path.stem
        audiosync.save_wav(out / f"{stem}_discussion.wav", kept)
        audiosync.write_cut_list(out / f"{stem}_keep.csv", spans)
        n_lecture = sum(1 for lab in labels if lab is audiosync.WindowLabel.LECTURE)
        lecture_windows.append(n_lecture)
        log(
            "info",
            "split",
            track=path.name,
            lecture_windows=n_lecture,
            kept_spans=len(spans),
            kept_seconds=round(sum(e - s for s, e in spans), 2),
        )
    summary["lecture_windows"] = lecture_windows
    (out / "split_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return 0


def _run_until(args: argparse.Namespace, until: str) -> int:
    config = PipelineConfig.load(args.config)
    if getattr(args, "out", None):
        config = dataclasses.replace(config, output_dir=Path(args.out))
    run_pipeline(config, jobs=getattr(args, "jobs", 1), log=log, until=until)
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    return _run_until(args, "extract")


def cmd_aggregate(args: argparse.Namespace) -> int:
    return _run_until(args, "aggregate")


def cmd_analyze(args: argparse.Namespace) -> int:
    table, digest = _read_table(args.features)
    marks_path = Path(args.outcomes)
    if not marks_path.is_file():
        raise CliInputError(f"outcomes file not found: {marks_path}")
    marks = load_marks_csv(marks_path)
    table = table.with_outcomes(marks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    normalized, report = normalize_weekly(table)
    normalized.save(out / "normalized_table.csv", digest)
    if report.degenerate:
        log("warn", "analyze", degenerate_columns=len(report.degenerate))
    screening = screen_features(table=normalized, alpha=args.alpha, bonferroni=args.bonferroni)
    (out / "screening.json").write_text(
        screening_report_json(screening, digest), encoding="utf-8"
    )
    write_labels_csv(out / "labels.csv", normalized, digest)
    selected = list(screening.selected)
    if selected:
        keep = set(selected)
        rows = tuple(
            dataclasses.replace(
                r, values={k: v for k, v in r.values.items() if k in keep}
            )
            for r in normalized.rows
        )
        GroupFeatureTable(rows).save(out / "selected_features.csv", digest)
        emit_plot_data(normalized, selected, out / "plots", digest)
    for name in selected:
        screen = screening.screen_for(name)
        log(
            "info",
            "analyze",
            feature=name,
            direction=screen.direction,
            selected_by=",".join(screen.selected_by),
        )
    log(
        "info",
        "analyze",
        tested=len(screening.screens),
        selected=len(selected),
        alpha=args.alpha,
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    table, digest = _read_table(args.features)
    table = _attach_labels(table, args.labels)
    features = _feature_columns(table)
    search = default_search(args.model, args.search)
    dataset, imputation = dataset_from_table(table, features)
    log("info", "train", rows=dataset.n, features=dataset.d, classifier=args.model)
    model = train_model(
        dataset, imputation, search, seed=args.seed, d_out=args.d_out
    )
    model.save(args.out, digest)
    chosen = " ".join(f"{k}={v}" for k, v in model.hyperparams.values)
    log("info", "train", chosen=chosen, out=args.out)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model_path = Path(args.model)
    if not model_path.is_file():
        raise CliInputError(f"model file not found: {model_path}")
    table, digest = _read_table(args.features)
    table = _attach_labels(table, args.labels)
    model = TrainedModel.load(model_path)
    result = evaluate_model(model, table)
    blob = evaluation_json(result, digest)
    if args.out:
        Path(args.out).write_text(blob, encoding="utf-8")
    else:
        print(blob, end="")
    log(
        "info",
        "evaluate",
        rows=len(table.rows),
        accuracy=round(result.pooled_accuracy, 4),
    )
    return 0


def _parse_plant(text: str) -> Plant:
    name, sep, strength = text.partition("=")
    if not sep:
        raise CliInputError(
            f"plant spec must look like Feature_Agg=+0.8, got {text!r}"
        )
    try:
        value = float(strength)
    except ValueError as exc:
        raise CliInputError(f"bad plant strength in {text!r}") from exc
    direction = -1 if value < 0 else 1
    return Plant(feature=name, direction=direction, strength=abs(value))


def cmd_synth(args: argparse.Namespace) -> int:
    plants = tuple(_parse_plant(p) for p in args.plant or ())
    spec = SyntheticSpec(
        groups=args.groups,
        weeks=args.weeks,
        students_per_group=args.students,
        mean_segments=args.segments,
        plants=plants,
        noise_level=args.noise,
        seed=args.seed,
        with_frames=args.frames,
    )
    generate_corpus(spec, args.out)
    log(
        "info",
        "synth",
        groups=args.groups,
        weeks=args.weeks,
        plants=len(plants),
        out=args.out,
    )
    print(str(Path(args.out) / "config.json"))
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = PipelineConfig.load(args.config)
    manifest = run_pipeline(config, jobs=args.jobs, log=log)
    last = manifest["stages"][-1]
    log(
        "info",
        "run",
        stages=len(manifest["stages"]),
        mean_accuracy=round(last.get("mean_accuracy", float("nan")), 4),
        out=config.output_dir,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialoglens",
        description="Discussion transcripts to outcome screening and prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="normalize raw transcripts to canonical JSONL")
    p.add_argument("--in", dest="in_dir", required=True, help="transcript directory")
    p.add_argument("--roster", default=None, help="roster JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("split", help="align session tracks and excise lecture audio")
    p.add_argument("--session-dir", required=True, help="directory of .wav tracks")
    p.add_argument("--window", type=float, default=5.0, help="window seconds")
    p.add_argument("--hop", type=float, default=2.5, help="hop seconds")
    p.add_argument("--radius", type=float, default=2.0, help="shift search radius (s)")
    p.add_argument("--max-lag", type=float, default=60.0, help="offset search bound (s)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("extract", help="run parse/embedding/extract stages")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel sessions")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("aggregate", help="run stages through group aggregation")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel sessions")
    p.set_defaults(fn=cmd_aggregate)

    p = sub.add_parser("analyze", help="normalize weekly, screen features, plot data")
    p.add_argument("--features", required=True, help="group feature table CSV")
    p.add_argument("--outcomes", required=True, help="marks CSV")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument("--bonferroni", action="store_true", help="divide alpha by m")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("train", help="train an outcome classifier")
    p.add_argument("--features", required=True, help="feature table CSV")
    p.add_argument("--labels", required=True, help="labels CSV (group_id,week,label)")
    p.add_argument(
        "--model",
        default="svm",
        choices=("svm", "knn", "rf", "gnb"),
        help="classifier family",
    )
    p.add_argument("--search", default="random:30", help="'grid' or 'random:<n>'")
    p.add_argument("--seed", type=int, default=7, help="training seed")
    p.add_argument("--d-out", type=int, default=None, help="projection dimension")
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="apply a trained model to a labeled table")
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--features", required=True, help="feature table CSV")
    p.add_argument("--labels", required=True, help="labels CSV (group_id,week,label)")
    p.add_argument("--out", default=None, help="write report here instead of stdout")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted effects")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.add_argument("--groups", type=int, default=6)
    p.add_argument("--weeks", type=int, default=4)
    p.add_argument("--students", type=int, default=4, help="students per group")
    p.add_argument("--segments", type=float, default=30.0, help="mean segments/session")
    p.add_argument(
        "--plant",
        action="append",
        metavar="FEATURE_AGG=STRENGTH",
        help="planted effect, e.g. MathTerms_DialogSum=+0.8 (repeatable)",
    )
    p.add_argument("--noise", type=float, default=1.0, help="latent noise level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", action="store_true", help="emit frame feature CSVs")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--jobs", type=int, default=1, help="parallel sessions")
    p.set_defaults(fn=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    def show(message, category, filename, lineno, file=None, line=None):
        log("warn", args.command, message=message)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = show
            return args.fn(args)
    except PipelineError as exc:
        log("error", exc.stage, error=exc)
        return 3
    except (TranscriptError, FileNotFoundError, ValueError) as exc:
        # Covers ConfigError and CliInputError: the input never validated.
        log("error", args.command, error=exc)
        return 2
    except Exception as exc:
        log("error", args.command, error=exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
