"""Pipeline orchestration, config handling, and CLI behavior."""

import dataclasses
import json
import subprocess
import warnings

import numpy as np
import pytest

from conftest import make_table, simple_marks
from dialoglens.audiosync import save_wav
from dialoglens.cli import main
from dialoglens.corpus import ValidationWarning
from dialoglens.pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    load_labels_csv,
    run_pipeline,
    write_labels_csv,
)
from dialoglens.synth import (
    Plant,
    SyntheticSpec,
    generate_corpus,
    generate_session_tracks,
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    spec = SyntheticSpec(
        groups=6,
        weeks=4,
        mean_segments=12.0,
        plants=(
            Plant("MathTerms_DialogSum", 1, 0.85),
            Plant("PE_DialogMean", 1, 0.7),
        ),
        seed=11,
    )
    generate_corpus(spec, root)
    return root


def quiet_run(config, **kwargs):
    # weekly normalization of a tiny corpus reports constant columns
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidationWarning)
        return run_pipeline(config, **kwargs)


@pytest.fixture(scope="module")
def agg_run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("agg_out")
    config = dataclasses.replace(
        PipelineConfig.load(corpus / "config.json"), output_dir=out
    )
    manifest = quiet_run(config, until="aggregate")
    return config, manifest


@pytest.fixture(scope="module")
def full_run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("full_out")
    config = dataclasses.replace(
        PipelineConfig.load(corpus / "config.json"), output_dir=out
    )
    manifest = quiet_run(config)
    return config, manifest


def raw_config(corpus, **overrides):
    raw = json.loads((corpus / "config.json").read_text(encoding="utf-8"))
    raw.update(overrides)
    return {k: v for k, v in raw.items() if v is not None}


class TestConfig:
    def test_load_resolves_relative_paths(self, corpus):
        config = PipelineConfig.load(corpus / "config.json")
        assert config.corpus_dir == corpus / "transcripts"
        assert config.corpus_dir.is_dir()
        assert config.marks.is_file()

    def test_unknown_key(self, corpus):
        with pytest.raises(ConfigError, match="unknown config key"):
            PipelineConfig.from_dict(raw_config(corpus, bogus=1), corpus)

    def test_missing_required_key(self, corpus):
        raw = raw_config(corpus)
        del raw["marks"]
        with pytest.raises(ConfigError, match="missing required.*marks"):
            PipelineConfig.from_dict(raw, corpus)

    def test_bad_translation_mode(self, corpus):
        with pytest.raises(ConfigError, match="translation_mode"):
            PipelineConfig.from_dict(
                raw_config(corpus, translation_mode="auto"), corpus
            )

    def test_offline_mode_needs_translation_path(self, corpus):
        raw = raw_config(corpus, translation_mode="offline")
        del raw["translation"]
        with pytest.raises(ConfigError, match="requires a translation path"):
            PipelineConfig.from_dict(raw, corpus)

    def test_bad_classifier(self, corpus):
        with pytest.raises(ConfigError, match="classifier"):
            PipelineConfig.from_dict(raw_config(corpus, classifier="mlp"), corpus)

    def test_alpha_out_of_range(self, corpus):
        with pytest.raises(ConfigError, match="alpha"):
            PipelineConfig.from_dict(raw_config(corpus, alpha=1.5), corpus)

    def test_bad_d_out(self, corpus):
        with pytest.raises(ConfigError, match="d_out"):
            PipelineConfig.from_dict(raw_config(corpus, d_out=0), corpus)

    def test_unknown_embedding_key(self, corpus):
        with pytest.raises(ConfigError, match="unknown embedding key"):
            PipelineConfig.from_dict(
                raw_config(corpus, embedding={"dims": 8}), corpus
            )

    def test_embedding_must_be_object(self, corpus):
        with pytest.raises(ConfigError, match="must be an object"):
            PipelineConfig.from_dict(raw_config(corpus, embedding=[8]), corpus)

    def test_missing_input_rejected(self, corpus):
        with pytest.raises(ConfigError, match="does not exist"):
            PipelineConfig.from_dict(
                raw_config(corpus, corpus_dir="no_such_dir"), corpus
            )

    def test_needs_an_embedding_source(self, corpus):
        raw = raw_config(corpus)
        del raw["embedding_corpus_dir"]
        with pytest.raises(ConfigError, match="embedding_corpus_dir or embedding_table"):
            PipelineConfig.from_dict(raw, corpus)

    def test_config_must_be_json_object(self, corpus, tmp_path):
        bad = tmp_path / "c.json"
        bad.write_text("not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            PipelineConfig.load(bad)
        bad.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            PipelineConfig.load(bad)

    def test_digest_ignores_output_dir(self, corpus):
        a = PipelineConfig.from_dict(raw_config(corpus, output_dir="a"), corpus)
        b = PipelineConfig.from_dict(raw_config(corpus, output_dir="b"), corpus)
        c = PipelineConfig.from_dict(raw_config(corpus, alpha=0.01), corpus)
        assert a.digest == b.digest
        assert a.digest != c.digest


class TestLabelsCsv:
    def labeled_table(self):
        return make_table(
            {
                ("G1", 1): {"X": 1.0},
                ("G2", 1): {"X": 2.0},
                ("G3", 1): {"X": 3.0},
            },
            marks=simple_marks({"G1": 50.0, "G2": 70.0, "G3": 90.0}),
        )

    def test_round_trip(self, tmp_path):
        table = self.labeled_table()
        path = tmp_path / "labels.csv"
        write_labels_csv(path, table, "feed" * 16)
        assert path.read_text(encoding="utf-8").startswith("# config_digest=feed")
        expected = {(r.group_id, r.week): r.label.value for r in table.rows}
        assert load_labels_csv(path) == expected

    def test_unlabeled_row_rejected(self, tmp_path):
        table = make_table({("G1", 1): {"X": 1.0}})
        with pytest.raises(ValueError, match="has no label"):
            write_labels_csv(tmp_path / "labels.csv", table, "d")

    def test_load_requires_header(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("group,week,label\nG1,1,High\n", encoding="utf-8")
        with pytest.raises(ValueError, match="expected header"):
            load_labels_csv(path)

    def test_load_rejects_short_rows(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("group_id,week,label\nG1,1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="expected 3 fields"):
            load_labels_csv(path)

    def test_load_rejects_duplicates(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text(
            "group_id,week,label\nG1,1,High\nG1,1,Low\n", encoding="utf-8"
        )
        with pytest.raises(ValueError, match="duplicate row"):
            load_labels_csv(path)


class TestRunPipeline:
    def test_stage_order_until_aggregate(self, agg_run):
        _, manifest = agg_run
        names = [s["name"] for s in manifest["stages"]]
        assert names == ["parse", "embedding", "extract", "aggregate"]
        assert manifest["failed_stage"] is None

    def test_aggregate_outputs_exist(self, agg_run):
        config, _ = agg_run
        out = config.output_dir
        assert len(list((out / "parsed").glob("*.jsonl"))) == 24
        assert len(list((out / "features").glob("*.jsonl"))) == 24
        for name in ("embedding.txt", "keywords.json", "features_table.csv",
                     "labels.csv", "manifest.json"):
            assert (out / name).is_file(), name
        assert not (out / "screening.json").exists()
        assert not (out / "FAILED").exists()

    def test_artifacts_embed_config_digest(self, agg_run):
        config, manifest = agg_run
        out = config.output_dir
        table_head = (out / "features_table.csv").read_text(encoding="utf-8")
        assert table_head.splitlines()[0] == f"# config_digest={config.digest}"
        keywords = json.loads((out / "keywords.json").read_text(encoding="utf-8"))
        assert keywords["config_digest"] == config.digest
        assert manifest["config_digest"] == config.digest
        assert "corpus_dir" in manifest["input_digests"]

    def test_parallel_extraction_is_deterministic(self, corpus, agg_run, tmp_path):
        config, _ = agg_run
        threaded = dataclasses.replace(config, output_dir=tmp_path / "jobs2")
        quiet_run(threaded, jobs=2, until="extract")
        for path in sorted((config.output_dir / "features").glob("*.jsonl")):
            twin = threaded.output_dir / "features" / path.name
            assert twin.read_bytes() == path.read_bytes()

    def test_full_run_completes(self, full_run):
        config, manifest = full_run
        names = [s["name"] for s in manifest["stages"]]
        assert names == [
            "parse", "embedding", "extract", "aggregate", "analyze", "train",
            "evaluate",
        ]
        out = config.output_dir
        for name in ("normalized_table.csv", "screening.json",
                     "selected_features.csv", "model.json", "evaluation.json"):
            assert (out / name).is_file(), name
        assert (out / "plots").is_dir()

    def test_screening_selects_planted_feature(self, full_run):
        config, _ = full_run
        report = json.loads(
            (config.output_dir / "screening.json").read_text(encoding="utf-8")
        )
        assert "MathTerms_DialogSum" in report["selected"]

    def test_evaluation_confusion_consistent(self, full_run):
        config, _ = full_run
        report = json.loads(
            (config.output_dir / "evaluation.json").read_text(encoding="utf-8")
        )
        assert 0.0 <= report["mean_accuracy"] <= 1.0
        confusion = np.array(report["confusion"])
        assert confusion.shape == (3, 3)
        assert np.trace(confusion) / confusion.sum() == report["pooled_accuracy"]

    def test_repeated_runs_are_byte_identical(self, full_run, tmp_path):
        config, _ = full_run
        again = dataclasses.replace(config, output_dir=tmp_path / "again")
        quiet_run(again)
        for name in ("features_table.csv", "screening.json", "evaluation.json"):
            first = (config.output_dir / name).read_bytes()
            second = (again.output_dir / name).read_bytes()
            assert first == second, name

    def test_failure_leaves_marker_and_manifest(self, corpus, tmp_path):
        bad_dir = tmp_path / "transcripts"
        bad_dir.mkdir()
        (bad_dir / "G01_week01.jsonl").write_text("{not json\n", encoding="utf-8")
        config = dataclasses.replace(
            PipelineConfig.load(corpus / "config.json"),
            corpus_dir=bad_dir,
            output_dir=tmp_path / "out",
        )
        with pytest.raises(PipelineError, match="parse"):
            run_pipeline(config)
        marker = tmp_path / "out" / "FAILED"
        assert marker.read_text(encoding="utf-8").startswith("parse:")
        manifest = json.loads(
            (tmp_path / "out" / "manifest.json").read_text(encoding="utf-8")
        )
        assert manifest["failed_stage"] == "parse"

        # a later healthy run clears the marker
        healthy = dataclasses.replace(config, corpus_dir=corpus / "transcripts")
        quiet_run(healthy, until="parse")
        assert not marker.exists()

    def test_bad_jobs_and_stage_names(self, corpus, tmp_path):
        config = dataclasses.replace(
            PipelineConfig.load(corpus / "config.json"), output_dir=tmp_path
        )
        with pytest.raises(ConfigError, match="jobs"):
            run_pipeline(config, jobs=0)
        with pytest.raises(ConfigError, match="unknown stage"):
            run_pipeline(config, until="publish")


class TestCli:
    def test_parse_command(self, corpus, tmp_path):
        code = main([
            "parse",
            "--in", str(corpus / "transcripts"),
            "--roster", str(corpus / "roster.json"),
            "--out", str(tmp_path / "parsed"),
        ])
        assert code == 0
        assert len(list((tmp_path / "parsed").glob("*.jsonl"))) == 24

    def test_parse_missing_directory(self, tmp_path):
        code = main(["parse", "--in", str(tmp_path / "nope"), "--out", str(tmp_path)])
        assert code == 2

    def test_run_invalid_config(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("nonsense", encoding="utf-8")
        assert main(["run", "--config", str(path)]) == 2

    def test_run_processing_failure(self, corpus, tmp_path):
        bad_dir = tmp_path / "transcripts"
        bad_dir.mkdir()
        (bad_dir / "G01_week01.jsonl").write_text("{not json\n", encoding="utf-8")
        raw = raw_config(corpus)
        for key, value in list(raw.items()):
            if isinstance(value, str) and (corpus / value).exists():
                raw[key] = str(corpus / value)
        raw["corpus_dir"] = str(bad_dir)
        raw["output_dir"] = str(tmp_path / "out")
        path = tmp_path / "c.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        assert main(["run", "--config", str(path)]) == 3

    def test_analyze_command(self, full_run, corpus, tmp_path, capsys):
        config, _ = full_run
        out = tmp_path / "an"
        code = main([
            "analyze",
            "--features", str(config.output_dir / "features_table.csv"),
            "--outcomes", str(corpus / "marks.csv"),
            "--out", str(out),
        ])
        assert code == 0
        report = json.loads((out / "screening.json").read_text(encoding="utf-8"))
        assert report["config_digest"] == config.digest
        assert (out / "labels.csv").is_file()
        assert (out / "selected_features.csv").is_file()
        assert "warn analyze" in capsys.readouterr().err

    def test_train_and_evaluate_commands(self, full_run, tmp_path):
        config, _ = full_run
        features = str(config.output_dir / "selected_features.csv")
        labels = str(config.output_dir / "labels.csv")
        model = tmp_path / "model.json"
        code = main([
            "train", "--features", features, "--labels", labels,
            "--model", "gnb", "--search", "grid", "--seed", "3",
            "--out", str(model),
        ])
        assert code == 0
        assert model.is_file()

        report_path = tmp_path / "eval.json"
        code = main([
            "evaluate", "--model", str(model), "--features", features,
            "--labels", labels, "--out", str(report_path),
        ])
        assert code == 0
        report = json.loads(report_path.read_text(encoding="utf-8"))
        assert report["config_digest"] == config.digest
        assert 0.0 <= report["pooled_accuracy"] <= 1.0

    def test_train_rejects_label_mismatches(self, full_run, tmp_path):
        config, _ = full_run
        features = str(config.output_dir / "selected_features.csv")
        original = (config.output_dir / "labels.csv").read_text(encoding="utf-8")

        extra = tmp_path / "extra.csv"
        extra.write_text(original + "ZZ,1,High\n", encoding="utf-8")
        code = main([
            "train", "--features", features, "--labels", str(extra),
            "--out", str(tmp_path / "m.json"),
        ])
        assert code == 2

        lines = [ln for ln in original.splitlines() if ln]
        short = tmp_path / "short.csv"
        short.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
        code = main([
            "train", "--features", features, "--labels", str(short),
            "--out", str(tmp_path / "m.json"),
        ])
        assert code == 2

    def test_evaluate_missing_model(self, full_run, tmp_path):
        config, _ = full_run
        code = main([
            "evaluate", "--model", str(tmp_path / "none.json"),
            "--features", str(config.output_dir / "selected_features.csv"),
            "--labels", str(config.output_dir / "labels.csv"),
        ])
        assert code == 2

    def test_split_command(self, tmp_path):
        session = generate_session_tracks(
            n_tracks=2,
            duration_s=40.0,
            lecture_spans=((10.0, 20.0),),
            offsets_s=(0.0, 1.5),
            seed=0,
        )
        session_dir = tmp_path / "session"
        session_dir.mkdir()
        for i, track in enumerate(session.tracks):
            save_wav(session_dir / f"t{i}.wav", track)
        out = tmp_path / "cut"
        assert main(["split", "--session-dir", str(session_dir), "--out", str(out)]) == 0

        summary = json.loads((out / "split_summary.json").read_text(encoding="utf-8"))
        assert summary["offsets_s"][0] == 0.0
        assert summary["offsets_s"][1] == pytest.approx(1.5, abs=1e-3)
        assert summary["threshold"] is not None
        for stem in ("t0", "t1"):
            assert (out / f"{stem}_discussion.wav").is_file()
            assert (out / f"{stem}_keep.csv").is_file()

    def test_split_needs_two_tracks(self, tmp_path):
        session_dir = tmp_path / "session"
        session_dir.mkdir()
        save_wav(session_dir / "only.wav", generate_session_tracks(
            n_tracks=2, duration_s=10.0, lecture_spans=(), offsets_s=(0.0, 0.0),
            seed=0,
        ).tracks[0])
        assert main(["split", "--session-dir", str(session_dir), "--out", str(tmp_path)]) == 2

    def test_synth_command(self, tmp_path, capsys):
        out = tmp_path / "seeded"
        code = main([
            "synth", "--out", str(out), "--groups", "3", "--weeks", "1",
            "--plant", "MathTerms_DialogSum=+0.8",
        ])
        assert code == 0
        assert capsys.readouterr().out.strip() == str(out / "config.json")
        manifest = json.loads((out / "plant_manifest.json").read_text(encoding="utf-8"))
        assert manifest["plants"] == [
            {"feature": "MathTerms_DialogSum", "direction": 1, "strength": 0.8}
        ]

    def test_synth_rejects_bad_plant_specs(self, tmp_path):
        out = str(tmp_path / "x")
        assert main(["synth", "--out", out, "--plant", "Bogus"]) == 2
        assert main(["synth", "--out", out, "--plant", "X=abc"]) == 2

    def test_console_entry_point(self):
        proc = subprocess.run(
            ["dialoglens", "--help"], capture_output=True, text=True, timeout=60
        )
        assert proc.returncode == 0
        assert "split" in proc.stdout
