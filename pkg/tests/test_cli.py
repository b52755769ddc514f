"""Command-line behavior: metrics files, determinism, sweeps, exit codes.

Everything runs in-process through main(argv) on small synthetic fixture
datasets; one subprocess smoke checks the installed console script.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from blindcnn.cli import SUMMARY_FIELDS, main
from blindcnn.config import load_config
from blindcnn.proposals import mix64

REPLAY_FILES = ("config.txt", "summary.csv", "steps.csv", "weights.npy")


def run_main(argv, expect=0, capsys=None):
    code = main([str(a) for a in argv])
    assert code == expect, f"exit {code} for {argv}"
    return capsys.readouterr() if capsys else None


def read_summary(out_dir: Path) -> dict:
    header, row = (out_dir / "summary.csv").read_text().splitlines()
    assert header == ",".join(SUMMARY_FIELDS)
    return dict(zip(SUMMARY_FIELDS, row.split(",")))


@pytest.fixture
def train_cfg(mnist_fixture_dir, tmp_path):
    path = tmp_path / "experiment.cfg"
    path.write_text(
        f"data-dir = {mnist_fixture_dir}\n"
        "eta = 0.05\n"
        "epochs = 2\n"
        "batch-size = 16\n"
        "subset-train = 64\n"
        "subset-test = 32\n"
        "seed = 11\n"
        f"out = {tmp_path / 'run'}\n"
    )
    return path, tmp_path / "run"


class TestTrain:
    def test_writes_metrics_files(self, train_cfg, capsys):
        cfg, out = train_cfg
        captured = run_main(["train", "--config", cfg], capsys=capsys)
        for name in ("config.txt", "weights.npy", "epochs.csv", "summary.csv"):
            assert (out / name).exists()
        assert not (out / "steps.csv").exists()  # only with --verbose-steps
        assert "final test accuracy" in captured.out
        assert f"metrics written to {out}" in captured.out

    def test_rerun_is_byte_identical(self, train_cfg):
        cfg, out = train_cfg
        run_main(["train", "--config", cfg, "--verbose-steps"])
        first = {n: (out / n).read_bytes() for n in REPLAY_FILES}
        run_main(["train", "--config", cfg, "--verbose-steps"])
        for name in REPLAY_FILES:
            assert (out / name).read_bytes() == first[name], name

    def test_config_echo_reparses_to_effective_config(self, train_cfg):
        cfg, out = train_cfg
        run_main(["train", "--config", cfg, "--seed", "77", "--conv-mode", "standard"])
        echoed = load_config(out / "config.txt")
        assert echoed.seed == 77
        assert echoed.conv_mode == "standard"
        assert echoed.subset_train == 64
        # the echo is itself a valid input that reproduces the run
        assert load_config(out / "config.txt") == echoed

    def test_summary_agrees_with_step_stream(self, train_cfg):
        cfg, out = train_cfg
        run_main(["train", "--config", cfg, "--verbose-steps"])
        summary = read_summary(out)
        rows = (out / "steps.csv").read_text().splitlines()[1:]
        accepted = [row.split(",")[3] for row in rows]
        assert summary["steps"] == str(len(rows)) == str(2 * 4)  # 2 epochs x 64/16
        assert summary["accepted"] == str(accepted.count("1"))
        assert summary["acceptance_rate"] == "%.17g" % (accepted.count("1") / len(rows))
        assert summary["train_examples"] == "64"
        assert summary["test_examples"] == "32"
        # losses replay to accept decisions: accepted iff after < before
        for row in rows:
            _, before, after, flag, eta = row.split(",")
            assert (float(after) < float(before)) == (flag == "1")
            assert eta == ""  # greedy proposals carry no sampled learning rate

    def test_zero_epochs_summary(self, mnist_fixture_dir, tmp_path, capsys):
        out = tmp_path / "run0"
        cfg = tmp_path / "zero.cfg"
        cfg.write_text(
            f"data-dir = {mnist_fixture_dir}\nepochs = 0\n"
            f"subset-train = 32\nsubset-test = 32\nout = {out}\n")
        captured = run_main(["train", "--config", cfg], capsys=capsys)
        summary = read_summary(out)
        assert summary["steps"] == "0" and summary["accepted"] == "0"
        assert summary["acceptance_rate"] == ""
        assert summary["initial_accuracy"] == summary["final_accuracy"]
        assert "acceptance rate n/a" in captured.out

    def test_missing_data_exits_2(self, tmp_path, capsys):
        code = main(["train", "--out", str(tmp_path / "r"),
                     "--config", str(write_config(tmp_path, f"data-dir = {tmp_path}\n"))])
        captured = capsys.readouterr()
        assert code == 2
        assert captured.err.startswith("error:")
        assert "dataset file not found" in captured.err

    def test_unreadable_config_exits_2(self, tmp_path, capsys):
        code = main(["train", "--config", str(tmp_path / "nope.cfg")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")


def write_config(tmp_path: Path, text: str, name: str = "c.cfg") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


class TestEval:
    def test_scores_stored_weights(self, train_cfg, capsys):
        cfg, out = train_cfg
        run_main(["train", "--config", cfg])
        summary = read_summary(out)
        captured = run_main(["eval", "--config", cfg], capsys=capsys)
        assert f"test accuracy {summary['final_accuracy']} on 32 examples" in captured.out

    def test_explicit_weights_path(self, train_cfg, tmp_path, capsys):
        cfg, out = train_cfg
        run_main(["train", "--config", cfg])
        moved = tmp_path / "elsewhere.npy"
        moved.write_bytes((out / "weights.npy").read_bytes())
        captured = run_main(["eval", "--config", cfg, "--weights", moved], capsys=capsys)
        assert f"test accuracy {read_summary(out)['final_accuracy']}" in captured.out

    def test_missing_weights_exits_2(self, train_cfg, capsys):
        cfg, out = train_cfg
        code = main(["eval", "--config", str(cfg)])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")


class TestGradcheck:
    def test_passes_both_modes(self, capsys):
        captured = run_main(["gradcheck"], capsys=capsys)
        assert "channel-sum: max relative error" in captured.out
        assert "standard: max relative error" in captured.out
        assert captured.out.rstrip().endswith("ok")


@pytest.fixture
def sweep_cfg(mnist_fixture_dir, tmp_path):
    path = tmp_path / "sweep.cfg"
    path.write_text(
        f"data-dir = {mnist_fixture_dir}\n"
        "eta = 0.05\n"
        "epochs = 1\n"
        "batch-size = 16\n"
        "subset-train = 48\n"
        "subset-test = 32\n"
        "seed = 11\n"
        f"out = {tmp_path / 'sweep'}\n"
    )
    return path, tmp_path / "sweep"


class TestSweepBatch:
    def test_single_row_table(self, sweep_cfg, capsys):
        cfg, out = sweep_cfg
        captured = run_main(["sweep-batch", "--config", cfg, "--batch-sizes", "16"],
                            capsys=capsys)
        lines = (out / "sweep-batch.csv").read_text().splitlines()
        assert lines[0] == "batch_size,uniform,normal"
        assert len(lines) == 2 and lines[1].startswith("16,")
        assert captured.out.strip() == "\n".join(lines)
        # table cells come straight from the per-cell summaries
        for col, dist in enumerate(("uniform", "normal")):
            cell = read_summary(out / "cells" / f"b16-{dist}")
            assert cell["final_accuracy"] == lines[1].split(",")[col + 1]
            assert cell["distribution"] == dist
            assert cell["batch_size"] == "16"
            assert cell["seed"] == str(mix64(11, 0, col))

    def test_rejects_bad_sizes(self, sweep_cfg, capsys):
        cfg, _ = sweep_cfg
        code = main(["sweep-batch", "--config", str(cfg), "--batch-sizes", "16,0"])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")


class TestSweepDist:
    def test_rows_layout(self, sweep_cfg, capsys):
        cfg, out = sweep_cfg
        captured = run_main(
            ["sweep-dist", "--config", cfg, "--layout", "rows"], capsys=capsys)
        lines = (out / "sweep-dist.csv").read_text().splitlines()
        assert lines[0] == "distribution,accuracy"
        assert [l.split(",")[0] for l in lines[1:]] == [
            "unit-uniform", "uniform", "normal"]
        assert captured.out.strip() == "\n".join(lines)

    def test_grid_layout_is_distribution_major(self, sweep_cfg):
        cfg, out = sweep_cfg
        run_main(["sweep-dist", "--config", cfg])  # grid is the default
        lines = (out / "sweep-dist.csv").read_text().splitlines()
        assert lines[0] == "experiment,distribution,freeze,accuracy"
        cells = [l.split(",") for l in lines[1:]]
        assert [c[0] for c in cells] == [str(i) for i in range(1, 10)]
        assert [(c[1], c[2]) for c in cells] == [
            (dist, freeze)
            for dist in ("unit-uniform", "uniform", "normal")
            for freeze in ("none", "layer-cyclic", "random-filter")]
        # each cell ran under its grid-derived seed
        for row in range(3):
            for col in range(3):
                name = f"{cells[3 * row + col][1]}-{cells[3 * row + col][2]}"
                summary = read_summary(out / "cells" / name)
                assert summary["seed"] == str(mix64(11, row, col))
                assert summary["final_accuracy"] == cells[3 * row + col][3]


class TestInstalledScript:
    def test_console_entry_point(self, mnist_fixture_dir, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(
            tmp_path,
            f"data-dir = {mnist_fixture_dir}\neta = 0.05\nepochs = 1\n"
            f"subset-train = 32\nsubset-test = 32\nout = {out}\n")
        proc = subprocess.run(
            ["blindcnn", "train", "--config", str(cfg)],
            capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        assert "final test accuracy" in proc.stdout
        assert (out / "summary.csv").exists()
