import json
import os

import pytest

from aoipm import synth
from aoipm.cli import main

SMALL_SYNTH = synth.SynthConfig(
    n_train=6, n_test=4, n_short_test=1, seed=11, life_min=130, life_max=150
)

SMALL_PIPELINE = {
    "min_cluster_size": 5,
    "n_baseline": 40,
    "learning_rate": 0.1,
    "epochs": 10,
    "window": 5,
    "hidden_size": 4,
    "batch_size": 32,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    synth.write_fd_files(SMALL_SYNTH, data)
    config = root / "config.json"
    config.write_text(json.dumps(SMALL_PIPELINE))
    out = root / "out"
    rc = main(
        [
            "train",
            "--config", str(config),
            "--data-dir", str(data),
            "--out-dir", str(out),
        ]
    )
    assert rc == 0
    return root, data, out, config


def run(workspace, *argv):
    root, data, out, config = workspace
    return main([argv[0], "--data-dir", str(data), "--out-dir", str(out), *argv[1:]])


class TestMakeData:
    def test_writes_three_files(self, tmp_path):
        rc = main(["make-data", "--data-dir", str(tmp_path / "d"), "--seed", "3"])
        assert rc == 0
        names = sorted(os.listdir(tmp_path / "d"))
        assert names == ["RUL_FD001.txt", "test_FD001.txt", "train_FD001.txt"]


class TestTrain:
    def test_artifacts_written(self, workspace):
        _, _, out, _ = workspace
        adir = out / "artifacts"
        for name in (
            "kb.txt",
            "hierarchies.txt",
            "model.json",
            "wer.txt",
            "pipeline_config.json",
            "holdout_rmse.txt",
            "retained.txt",
        ):
            assert (adir / name).exists(), name


class TestQuantify:
    def test_tsv_and_png_outputs(self, workspace):
        _, _, out, _ = workspace
        rc = run(workspace, "quantify", "--split", "test", "--plot-units", "2")
        assert rc == 0
        qdir = out / "quantification_test"
        tsvs = sorted(p for p in os.listdir(qdir) if p.endswith(".tsv"))
        pngs = sorted(p for p in os.listdir(qdir) if p.endswith(".png"))
        assert len(tsvs) == SMALL_SYNTH.n_test
        assert len(pngs) == 2
        first = (qdir / tsvs[0]).read_text().splitlines()
        assert first[0] == "cycle\tcluster\tweight"


class TestDetect:
    def test_charts_and_change_points(self, workspace):
        _, _, out, _ = workspace
        rc = run(workspace, "detect", "--split", "train", "--plot-units", "1")
        assert rc == 0
        ddir = out / "detect_train"
        assert (ddir / "change_points.tsv").exists()
        lines = (ddir / "change_points.tsv").read_text().splitlines()
        assert lines[0] == "unit\tchange_point"
        assert len(lines) == 1 + SMALL_SYNTH.n_train
        assert (ddir / "unit_001.png").exists()
        chart = (ddir / "unit_001.tsv").read_text().splitlines()
        assert chart[0].split("\t")[0] == "cycle"


class TestRul:
    def test_report_and_figures(self, workspace):
        _, _, out, _ = workspace
        rc = run(workspace, "rul", "--plot-units", "1")
        assert rc == 0
        text = (out / "rul_report.tsv").read_text()
        assert text.startswith("unit\tchange_point")
        assert "# summary" in text


class TestEvaluate:
    def test_summary_written(self, workspace):
        _, _, out, _ = workspace
        rc = run(workspace, "evaluate")
        assert rc == 0
        text = (out / "evaluation.tsv").read_text()
        assert "# summary" in text
        assert "mae" in text


class TestExportPlots:
    def test_figures_rendered(self, workspace):
        _, _, out, _ = workspace
        rc = run(workspace, "export-plots", "--split", "train", "--plot-units", "2")
        assert rc == 0
        pdir = out / "figures"
        names = sorted(os.listdir(pdir))
        assert "quantification_unit_001.png" in names
        assert "ewma_unit_001.png" in names
        assert len(names) == 4
