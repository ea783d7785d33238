"""Command-line behavior: files written, exit codes, determinism."""

from __future__ import annotations

import csv
import json

import pytest

from qcad.cli import main

SYNTH_ARGS = ["synth", "--scheme", "s1", "--n", "160", "--p", "3", "--pcat", "1",
              "--q", "2", "--seed", "3"]
DETECT_BASE = ["--k", "40", "--trees", "3", "--seed", "5"]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(SYNTH_ARGS + ["--out-dir", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def scores_path(tmp_path_factory, synth_dir):
    out = tmp_path_factory.mktemp("scores") / "scores.jsonl"
    code = main([
        "detect", "--data", str(synth_dir / "data.csv"),
        "--schema", str(synth_dir / "schema.txt"),
        *DETECT_BASE, "--out", str(out),
    ])
    assert code == 0
    return out


class TestSynth:
    def test_writes_dataset_and_schema(self, synth_dir):
        assert (synth_dir / "data.csv").exists()
        assert (synth_dir / "schema.txt").exists()
        header = (synth_dir / "data.csv").read_text().splitlines()[0]
        assert header.split(",")[:3] == ["ctx1", "ctx2", "ctx3"]

    def test_unknown_scheme_usage_error(self, tmp_path):
        code = main(["synth", "--scheme", "s9", "--out-dir", str(tmp_path)])
        assert code == 2

    def test_zero_samples_usage_error(self, tmp_path):
        code = main(["synth", "--scheme", "s1", "--n", "0", "--out-dir", str(tmp_path)])
        assert code == 2

    def test_inject_rate_writes_labels_and_record(self, tmp_path):
        code = main(SYNTH_ARGS + ["--out-dir", str(tmp_path),
                                  "--inject-rate", "0.05"])
        assert code == 0
        header = (tmp_path / "data.csv").read_text().splitlines()[0]
        assert "__anomaly__" in header
        record = json.loads((tmp_path / "injection.json").read_text())
        assert len(record["indices"]) == 8  # 5% of 160


class TestDetect:
    def test_scores_file_shape(self, scores_path):
        lines = scores_path.read_text().splitlines()
        assert len(lines) == 160
        rec = json.loads(lines[0])
        assert set(rec) == {"index", "final_score", "partial_scores", "reference_group"}
        assert len(rec["reference_group"]) == 40

    def test_rerun_byte_identical(self, synth_dir, tmp_path, scores_path):
        out = tmp_path / "again.jsonl"
        code = main([
            "detect", "--data", str(synth_dir / "data.csv"),
            "--schema", str(synth_dir / "schema.txt"),
            *DETECT_BASE, "--out", str(out),
        ])
        assert code == 0
        assert out.read_bytes() == scores_path.read_bytes()

    def test_threads_flag_does_not_change_output(self, synth_dir, tmp_path, scores_path):
        out = tmp_path / "threaded.jsonl"
        code = main([
            "detect", "--data", str(synth_dir / "data.csv"),
            "--schema", str(synth_dir / "schema.txt"),
            *DETECT_BASE, "--threads", "2", "--out", str(out),
        ])
        assert code == 0
        assert out.read_bytes() == scores_path.read_bytes()

    def test_distance_cache_round_trip(self, synth_dir, tmp_path, scores_path):
        cache = tmp_path / "dist.bin"
        args = [
            "detect", "--data", str(synth_dir / "data.csv"),
            "--schema", str(synth_dir / "schema.txt"),
            *DETECT_BASE, "--distance-cache", str(cache),
        ]
        out1 = tmp_path / "c1.jsonl"
        assert main(args + ["--out", str(out1)]) == 0
        assert cache.exists()
        out2 = tmp_path / "c2.jsonl"
        assert main(args + ["--out", str(out2)]) == 0  # second run loads the cache
        assert out1.read_bytes() == out2.read_bytes()
        assert out1.read_bytes() == scores_path.read_bytes()

    def test_k_too_large_usage_error(self, synth_dir, tmp_path):
        code = main([
            "detect", "--data", str(synth_dir / "data.csv"),
            "--schema", str(synth_dir / "schema.txt"),
            "--k", "160", "--out", str(tmp_path / "x.jsonl"),
        ])
        assert code == 2

    def test_schema_mismatch_data_error(self, synth_dir, tmp_path):
        bad_schema = tmp_path / "schema.txt"
        bad_schema.write_text("wrong,contextual,numeric\nbeh,behavioral,numeric\n")
        code = main([
            "detect", "--data", str(synth_dir / "data.csv"),
            "--schema", str(bad_schema), "--out", str(tmp_path / "x.jsonl"),
        ])
        assert code == 1

    def test_missing_required_flag_usage_error(self):
        assert main(["detect"]) == 2


class TestExplain:
    def explain_args(self, synth_dir, scores_path, out_dir):
        return [
            "explain", "--data", str(synth_dir / "data.csv"),
            "--schema", str(synth_dir / "schema.txt"),
            "--scores", str(scores_path), *DETECT_BASE,
            "--out-dir", str(out_dir),
        ]

    def test_single_index_outputs(self, synth_dir, scores_path, tmp_path):
        out = tmp_path / "expl"
        code = main(self.explain_args(synth_dir, scores_path, out) + ["--index", "7"])
        assert code == 0
        assert (out / "explanation_7.json").exists()
        beanplots = sorted(p.name for p in out.glob("beanplot_7_*.svg"))
        assert beanplots == ["beanplot_7_beh1.svg", "beanplot_7_beh2.svg"]
        contexts = sorted(p.name for p in out.glob("context_7_*.svg"))
        assert contexts == ["context_7_ctx1.svg", "context_7_ctx2.svg",
                            "context_7_ctx3.svg"]

    def test_top_without_index(self, synth_dir, scores_path, tmp_path):
        out = tmp_path / "expl_top"
        code = main(self.explain_args(synth_dir, scores_path, out) + ["--top", "2"])
        assert code == 0
        assert len(list(out.glob("explanation_*.json"))) == 2

    def test_index_out_of_range(self, synth_dir, scores_path, tmp_path):
        code = main(self.explain_args(synth_dir, scores_path, tmp_path / "x")
                    + ["--index", "160"])
        assert code == 2

    def test_neither_index_nor_top(self, synth_dir, scores_path, tmp_path):
        code = main(self.explain_args(synth_dir, scores_path, tmp_path / "x"))
        assert code == 2

    def test_unwritable_out_dir(self, synth_dir, scores_path, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("not a directory")
        code = main(self.explain_args(synth_dir, scores_path, blocker / "sub")
                    + ["--index", "1"])
        assert code == 1


class TestEval:
    def test_scheme_eval_writes_csv(self, tmp_path):
        out = tmp_path / "results.csv"
        code = main([
            "eval", "--scheme", "s1", "--n", "120", "--p", "3", "--pcat", "1",
            "--q", "2", "--k", "30", "--trees", "3", "--seed", "2",
            "--trials", "2", "--out", str(out),
        ])
        assert code == 0
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 4  # header + three metrics
        assert {r[1] for r in rows[1:]} == {"roc_auc", "pr_auc", "p_at_n"}

    def test_zero_trials_usage_error(self):
        code = main(["eval", "--scheme", "s1", "--n", "120", "--trials", "0"])
        assert code == 2

    def test_needs_source(self):
        assert main(["eval", "--trials", "1"]) == 2


class TestSweep:
    def test_eta_sweep_rows(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep", "--sweep", "eta", "--values", "1,5,10,none",
            "--scheme", "s1", "--n", "120", "--p", "3", "--pcat", "1", "--q", "2",
            "--k", "30", "--trees", "3", "--seed", "2", "--trials", "1",
            "--out", str(out),
        ])
        assert code == 0
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert {r[0] for r in rows[1:]} == {"eta=1", "eta=5", "eta=10", "eta=none"}

    def test_k_sweep(self, tmp_path):
        out = tmp_path / "sweepk.csv"
        code = main([
            "sweep", "--sweep", "k", "--values", "10,30",
            "--scheme", "s1", "--n", "120", "--p", "3", "--pcat", "1", "--q", "2",
            "--trees", "3", "--seed", "2", "--trials", "1", "--out", str(out),
        ])
        assert code == 0
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert {r[0] for r in rows[1:]} == {"k=10", "k=30"}

    def test_scaling_sweep(self, tmp_path):
        out = tmp_path / "sweeps.csv"
        code = main([
            "sweep", "--sweep", "scaling",
            "--scheme", "s1", "--n", "120", "--p", "3", "--pcat", "1", "--q", "2",
            "--k", "30", "--trees", "3", "--seed", "2", "--trials", "1",
            "--out", str(out),
        ])
        assert code == 0
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert {r[0] for r in rows[1:]} == {"scaled", "unscaled"}

    def test_values_required_for_k(self):
        code = main(["sweep", "--sweep", "k", "--scheme", "s1", "--n", "100"])
        assert code == 2


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, synth_dir, tmp_path,
                                                         scores_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "k=40\ntrees=3\nseed=5\n"
            f"data={synth_dir / 'data.csv'}\n"
            f"schema={synth_dir / 'schema.txt'}\n"
        )
        out = tmp_path / "cfg.jsonl"
        code = main(["detect", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        assert out.read_bytes() == scores_path.read_bytes()
        # a flag after --config wins over the file value
        out2 = tmp_path / "cfg2.jsonl"
        code = main(["detect", "--config", str(cfg), "--k", "20",
                     "--out", str(out2)])
        assert code == 0
        rec = json.loads(out2.read_text().splitlines()[0])
        assert len(rec["reference_group"]) == 20

    def test_malformed_config(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just words\n")
        assert main(["detect", "--config", str(cfg)]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["detect", "--config", str(tmp_path / "nope.cfg")]) == 1
