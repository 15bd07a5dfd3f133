import json
import os
import subprocess
import sys

import numpy as np
import pytest

from graphon_fbsde import cli, fbsde, runner
from graphon_fbsde.artifacts import load_manifest, read_csv, sha256_file
from graphon_fbsde.config import loads

TINY = """\
seed: 0
graphon: {kind: two_block, a: 2.0, b: 0.5}
grid: {T: 1.0, n_star: 5}
train: {K: 20, M: 16, M_val: 32, eval_every: 10, hidden: [4], lr: 0.01}
evaluate: {M: 64, seed: 1, trajectory_particles: 4}
exploitability: {M: 16, K: 10, eval_every: 5, n_paths: 4}
sweep: {M_values: [8, 16], seeds: [0, 1], K: 5}
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(TINY)
    return path


def _run(mode, cfg_file, out, *extra):
    return cli.main([mode, "--config", str(cfg_file), "--out", str(out), *extra])


class TestModes:
    def test_train_manifest(self, cfg_file, tmp_path):
        out = tmp_path / "train"
        assert _run("train", cfg_file, out) == 0
        man = load_manifest(out / "manifest.json")
        names = {e.path for e in man.files}
        assert {"history.csv", "checkpoint.gfb", "utilities.csv", "trajectory.csv", "config.yaml",
                "history.svg", "trajectory.svg"} <= names
        for e in man.files:
            assert sha256_file(out / e.path) == e.sha256

    def test_rerun_identical_data(self, cfg_file, tmp_path):
        assert _run("train", cfg_file, tmp_path / "a") == 0
        assert _run("train", cfg_file, tmp_path / "b") == 0
        ha = load_manifest(tmp_path / "a" / "manifest.json").data_hashes()
        hb = load_manifest(tmp_path / "b" / "manifest.json").data_hashes()
        assert ha == hb

    def test_evaluate_needs_checkpoint(self, cfg_file, tmp_path):
        assert _run("evaluate", cfg_file, tmp_path / "e", "--checkpoint", str(tmp_path / "none.gfb")) == 2

    def test_evaluate(self, cfg_file, tmp_path):
        _run("train", cfg_file, tmp_path / "t", "--no-plots")
        ck = tmp_path / "t" / "checkpoint.gfb"
        assert _run("evaluate", cfg_file, tmp_path / "e", "--checkpoint", str(ck), "--no-plots") == 0
        tab = read_csv(tmp_path / "e" / "metrics.csv", "graphon_fbsde.metrics/v1")
        assert set(tab.column("group", numeric=False)) == {"lower", "upper"}
        assert (tmp_path / "e" / "independence.csv").exists()

    def test_exploitability(self, cfg_file, tmp_path):
        out = tmp_path / "x"
        assert _run("exploitability", cfg_file, out, "--no-plots") == 0
        lines = (out / "exploitability.csv").read_text().splitlines()
        assert lines[-1].startswith("average,")
        summary = json.loads((out / "manifest.json").read_text())["summary"]
        assert summary["average_exploitability"] >= 0

    def test_oracle_compare_preloaded_zero(self, cfg_file, tmp_path):
        cfg = loads(TINY).replace(graphon=loads("seed: 0").graphon)
        ck = tmp_path / "exact.gfb"
        runner.save_controls(ck, fbsde.constant_y0_controls(cfg.grid, 1.5), cfg)
        cfg_file.write_text(TINY.replace("{kind: two_block, a: 2.0, b: 0.5}", "{kind: constant}"))
        out = tmp_path / "o"
        assert _run("oracle-compare", cfg_file, out, "--checkpoint", str(ck), "--no-plots") == 0
        tab = read_csv(out / "oracle.csv", "graphon_fbsde.oracle_compare/v1")
        np.testing.assert_allclose(tab.column("rel_error_pct"), 0.0, atol=1e-12)
        ora = read_csv(out / "oracle_trajectory.csv", "graphon_fbsde.trajectory/v1")
        sim = read_csv(out / "trajectory.csv", "graphon_fbsde.trajectory/v1")
        np.testing.assert_allclose(ora.column("Y"), sim.column("Y"), atol=1e-12)

    def test_oracle_compare_unsupported(self, cfg_file, tmp_path):
        cfg_file.write_text(TINY + "model: {kind: markovian_bs}\n")
        assert _run("oracle-compare", cfg_file, tmp_path / "o") == 1

    def test_sweep_runtime_not_hashed(self, cfg_file, tmp_path):
        out = tmp_path / "s"
        assert _run("sweep-M", cfg_file, out, "--no-plots") == 0
        man = load_manifest(out / "manifest.json")
        assert "sweep_runtime.csv" not in man.data_hashes()
        assert "sweep_runtime.csv" in {e.path for e in man.files}
        assert len(read_csv(out / "sweep_summary.csv")) == 2


class TestExitCodes:
    def test_bad_config(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("seed: 0\ngraphon: {kind: ring}\n")
        assert _run("train", p, tmp_path / "o") == 1

    def test_missing_config_file(self, tmp_path):
        assert _run("train", tmp_path / "nope.yaml", tmp_path / "o") == 1

    def test_unknown_option(self, cfg_file):
        assert cli.main(["train", "--config", str(cfg_file), "--bogus"]) == 1

    def test_help(self, capsys):
        assert cli.main(["--help"]) == 0
        assert "sweep-M" in capsys.readouterr().out


class TestOutputDirectory:
    def test_env_override(self, cfg_file, tmp_path, monkeypatch):
        monkeypatch.setenv(runner.OUT_ENV, str(tmp_path / "env"))
        assert cli.main(["train", "--config", str(cfg_file), "--no-plots"]) == 0
        assert (tmp_path / "env" / "manifest.json").exists()

    def test_flag_beats_env(self, cfg_file, tmp_path, monkeypatch):
        monkeypatch.setenv(runner.OUT_ENV, str(tmp_path / "env"))
        assert _run("train", cfg_file, tmp_path / "flag", "--no-plots") == 0
        assert (tmp_path / "flag" / "manifest.json").exists()
        assert not (tmp_path / "env").exists()

    def test_seed_override_recorded(self, cfg_file, tmp_path):
        assert _run("train", cfg_file, tmp_path / "o", "--seed", "7", "--no-plots") == 0
        assert loads((tmp_path / "o" / "config.yaml").read_text()).seed == 7


def test_module_entry_point(cfg_file, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "graphon_fbsde", "train", "--config", str(cfg_file),
                           "--out", str(tmp_path / "m"), "--no-plots"],
                          capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 0, proc.stderr
    assert "train: wrote" in proc.stdout
