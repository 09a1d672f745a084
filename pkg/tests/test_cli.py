import csv
import json
import os

import numpy as np
import pytest

from otopic.cli import build_parser, main

SAMPLE_ARGS = ["--input", "", "--text-column", "review", "--label-column", "category",
               "--min-df", "2", "--embed-dim", "16", "--epochs", "20",
               "--warmup", "20", "--seed", "0"]


def fit_args(sample_csv, out_dir, extra=()):
    args = ["fit"] + SAMPLE_ARGS + ["--k", "3", "--output-dir", str(out_dir)]
    args[args.index("--input") + 1] = str(sample_csv)
    return args + list(extra)


@pytest.fixture(scope="module")
def sample_csv(data_dir):
    return str(data_dir / "sample_reviews.csv")


@pytest.fixture(scope="module")
def fit_dir(sample_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert main(fit_args(sample_csv, out)) == 0
    return out


class TestParser:
    def test_subcommand_required(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_lambda_flag_maps_to_lam(self):
        args = build_parser().parse_args(["fit", "--lambda", "0.5"])
        assert args.lam == 0.5

    def test_defaults(self):
        args = build_parser().parse_args(["fit"])
        assert args.epochs == 200
        assert args.warmup == 100
        assert args.min_df == 2
        assert args.output_dir == "."


class TestFit:
    def test_artifacts_written(self, fit_dir):
        for name in ("proportions.csv", "topics.jsonl", "manifest.json", "model.npz"):
            assert (fit_dir / name).exists()
        assert not (fit_dir / "k_report.txt").exists()

    def test_proportions_shape(self, fit_dir):
        with open(fit_dir / "proportions.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "text"
        assert len(rows) == 43  # header + 42 documents
        assert len(rows[1]) == 4  # text + 3 topics

    def test_topics_jsonl_valid(self, fit_dir):
        lines = (fit_dir / "topics.jsonl").read_text().splitlines()
        assert len(lines) == 3
        entries = [json.loads(line) for line in lines]
        assert [e["topic_id"] for e in entries] == [0, 1, 2]
        labels = [e["label"] for e in entries]
        assert len(set(labels)) == 3  # deduped

    def test_manifest_captures_config(self, fit_dir):
        manifest = json.loads((fit_dir / "manifest.json").read_text())
        assert manifest["seed"] == 0
        assert manifest["config"]["k"] == 3
        assert manifest["config"]["epochs"] == 20

    def test_missing_k_is_usage_error(self, sample_csv, tmp_path, capsys):
        args = fit_args(sample_csv, tmp_path)
        del args[args.index("--k"):args.index("--k") + 2]
        assert main(args) == 2
        assert "usage error" in capsys.readouterr().err

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        args = fit_args(tmp_path / "nope.csv", tmp_path)
        assert main(args) == 1
        err = capsys.readouterr().err
        assert "error" in err and "load_csv" in err

    def test_bad_column_is_runtime_error(self, sample_csv, tmp_path):
        args = fit_args(sample_csv, tmp_path)
        args[args.index("--text-column") + 1] = "body"
        assert main(args) == 1


class TestConfigFile:
    def test_config_file_sets_defaults(self, sample_csv, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text(f'input = "{sample_csv}"\ntext_column = "review"\n'
                       'epochs = 5\nwarmup = 5\nembed_dim = 16\nseed = 3\n')
        out = tmp_path / "out"
        assert main(["fit", "--config", str(cfg), "--k", "3",
                     "--output-dir", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["epochs"] == 5
        assert manifest["seed"] == 3

    def test_flag_overrides_config(self, sample_csv, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('seed = 3\nepochs = 5\nwarmup = 5\nembed_dim = 16\n')
        out = tmp_path / "out"
        args = fit_args(sample_csv, out, extra=["--config", str(cfg), "--seed", "9"])
        args[args.index("--epochs") + 1] = "4"
        assert main(args) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 9
        assert manifest["config"]["epochs"] == 4


class TestSweep:
    def test_k_grid_flag(self, sample_csv, tmp_path):
        out = tmp_path / "out"
        args = ["sweep"] + SAMPLE_ARGS + ["--k-grid", "2,3",
                                          "--output-dir", str(out)]
        args[args.index("--input") + 1] = sample_csv
        assert main(args) == 0
        lines = (out / "k_report.txt").read_text().splitlines()
        assert lines[0].startswith("K=2  TC=")
        assert lines[1].startswith("K=3  TC=")
        assert lines[2].startswith("CHOSEN K=")
        assert (out / "proportions.csv").exists()
        assert (out / "model.npz").exists()

    def test_k_range_flags(self, sample_csv, tmp_path):
        out = tmp_path / "out"
        args = ["sweep"] + SAMPLE_ARGS + ["--k-min", "2", "--k-max", "4",
                                          "--k-step", "2", "--output-dir", str(out)]
        args[args.index("--input") + 1] = sample_csv
        assert main(args) == 0
        report = (out / "k_report.txt").read_text()
        assert "K=2" in report and "K=4" in report and "K=3" not in report

    def test_bad_grid_is_usage_error(self, sample_csv, tmp_path):
        args = ["sweep"] + SAMPLE_ARGS + ["--k-grid", "2,x"]
        args[args.index("--input") + 1] = sample_csv
        assert main(args) == 2


class TestEval:
    def test_metrics_json(self, sample_csv, fit_dir, tmp_path, capsys):
        out = str(tmp_path / "metrics.json")
        assert main(["eval", "--model", str(fit_dir / "model.npz"),
                     "--train", sample_csv, "--test", sample_csv,
                     "--text-column", "review", "--label-column", "category",
                     "--output", out]) == 0
        report = json.loads(open(out).read())
        for key in ("tc_mean", "td", "tq", "purity", "nmi", "pn", "acc"):
            assert key in report
        assert 0.0 <= report["purity"] <= 1.0
        # same split for train and test: nearest neighbor is the doc itself
        assert report["acc"] >= 0.8


class TestCalibrate:
    def test_roundtrip(self, tmp_path):
        src = tmp_path / "props.csv"
        with open(src, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["text", "A", "B", "C"])
            writer.writerow(["doc one", "0.5", "0.3", "0.2"])
        out = str(tmp_path / "cal.csv")
        assert main(["calibrate", "--input", str(src), "--output", out]) == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["text", "A", "B", "C"]
        assert rows[1] == ["doc one", "0.745", "0.255", "0.000"]

    def test_without_text_column(self, tmp_path):
        src = tmp_path / "props.csv"
        src.write_text("A,B\n0.6,0.4\n")
        out = str(tmp_path / "cal.csv")
        assert main(["calibrate", "--input", str(src), "--output", out]) == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert float(rows[1][0]) + float(rows[1][1]) == pytest.approx(1.0, abs=0.005)


class TestOffline:
    def test_no_network_without_endpoint(self, sample_csv, tmp_path, monkeypatch):
        import otopic.refine as refine_mod

        def forbidden(*args, **kwargs):
            raise AssertionError("network access attempted")

        monkeypatch.setattr(refine_mod.requests, "post", forbidden)
        out = tmp_path / "out"
        assert main(fit_args(sample_csv, out)) == 0
