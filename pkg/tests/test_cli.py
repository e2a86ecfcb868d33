"""Command-line interface: config resolution, exit codes, reproducibility."""

import json
import os

import pytest

from kdvlab.cli import ConfigError, main, parse_config


def run_cli(*args):
    return main(list(args))


class TestParseConfig:
    def test_flag_overrides_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("j = 3\nK = 16\ndt = 0.001\nT = 0.1\n")
        resolved = parse_config("solve", str(cfg), {"j": "2"})
        assert resolved["j"] == 2
        assert resolved["K"] == 16

    def test_unknown_key_named(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("jj = 2\n")
        with pytest.raises(ConfigError, match="'jj'"):
            parse_config("solve", str(cfg), {})

    def test_missing_required_named(self):
        with pytest.raises(ConfigError, match="'K'"):
            parse_config("solve", None, {"j": "2", "dt": "0.001", "T": "0.1"})

    def test_type_mismatch_named(self):
        with pytest.raises(ConfigError, match="'K'"):
            parse_config("solve", None, {"j": "2", "K": "many", "dt": "1e-3", "T": "0.1"})

    def test_comments_and_blanks(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# header\n\nj = 1  # inline\nK = 8\ndt = 1e-3\nT = 0.01\n")
        resolved = parse_config("solve", str(cfg), {})
        assert resolved["j"] == 1 and resolved["K"] == 8

    def test_n_list_parsing(self):
        resolved = parse_config(
            "almost-cons", None, {"j": "1", "K": "8", "N_list": "2,4,8", "s": "-0.5"}
        )
        assert resolved["N_list"] == (2, 4, 8)


class TestExitCodes:
    def test_resonance_check_success(self, tmp_path, capsys):
        status = run_cli("resonance-check", "--j", "1", "--K", "16", "--out", str(tmp_path))
        assert status == 0
        out = capsys.readouterr().out
        assert "ratio in [3, 3]" in out

    def test_solve_bad_dt_is_config_error(self, tmp_path):
        status = run_cli(
            "solve", "--j", "2", "--K", "8", "--dt", "-0.1", "--T", "0.1",
            "--out", str(tmp_path),
        )
        assert status == 2

    def test_missing_required_is_config_error(self, tmp_path):
        status = run_cli("solve", "--j", "2", "--out", str(tmp_path))
        assert status == 2

    def test_nonmonotone_almost_cons_is_run_failure(self, tmp_path, capsys):
        # both thresholds sit above the grid band, so the two rows are the
        # identical bare L2 drift: the strict-decrease assertion must trip
        # (exit 1) and name the offending pair
        status = run_cli(
            "almost-cons", "--j", "1", "--K", "8", "--N_list", "8,16",
            "--s", "-0.5", "--dt", "1e-3", "--T", "0.05", "--out", str(tmp_path),
        )
        assert status == 1
        err = capsys.readouterr().err
        assert "not strictly decreasing" in err


class TestSolveOutputs:
    def test_snapshots_and_csv(self, tmp_path):
        status = run_cli(
            "solve", "--j", "2", "--K", "8", "--dt", "1e-3", "--T", "0.02",
            "--samples", "4", "--seed", "3", "--out", str(tmp_path),
        )
        assert status == 0
        files = sorted(os.listdir(tmp_path))
        assert "manifest.json" in files
        assert "run_conserved.csv" in files
        assert any(f.startswith("run_0") and f.endswith(".json") for f in files)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "solve"
        assert manifest["finished"] is not None

    def test_snapshot_input_round_trip(self, tmp_path):
        s1 = run_cli(
            "solve", "--j", "1", "--K", "8", "--dt", "1e-3", "--T", "0.01",
            "--samples", "1", "--seed", "5", "--out", str(tmp_path / "a"),
        )
        assert s1 == 0
        snap = str(tmp_path / "a" / "run_0000.json")
        s2 = run_cli(
            "solve", "--j", "1", "--K", "8", "--dt", "1e-3", "--T", "0.01",
            "--input", snap, "--out", str(tmp_path / "b"),
        )
        assert s2 == 0

    def test_mismatched_snapshot_grid_rejected(self, tmp_path):
        run_cli(
            "solve", "--j", "1", "--K", "8", "--dt", "1e-3", "--T", "0.01",
            "--samples", "1", "--out", str(tmp_path / "a"),
        )
        status = run_cli(
            "solve", "--j", "2", "--K", "16", "--dt", "1e-3", "--T", "0.01",
            "--input", str(tmp_path / "a" / "run_0000.json"), "--out", str(tmp_path / "b"),
        )
        assert status == 2


class TestReproducibility:
    def test_byte_identical_csv_rerun(self, tmp_path):
        args = [
            "scaling-check", "--j", "1", "--K", "8", "--mu", "2", "--s", "-1.5",
            "--dt", "1e-3", "--T", "0.02", "--seed", "7",
        ]
        assert run_cli(*args, "--out", str(tmp_path / "r1")) == 0
        assert run_cli(*args, "--out", str(tmp_path / "r2")) == 0
        csv1 = (tmp_path / "r1" / "scaling-check.csv").read_bytes()
        csv2 = (tmp_path / "r2" / "scaling-check.csv").read_bytes()
        assert csv1 == csv2

    def test_config_hash_stable_under_reordering(self, tmp_path):
        c1 = tmp_path / "a.cfg"
        c2 = tmp_path / "b.cfg"
        c1.write_text("j = 1\nK = 8\ndt = 1e-3\nT = 0.01\n")
        c2.write_text("T = 0.01\ndt = 1e-3\nK = 8\nj = 1\n")
        assert run_cli("solve", "--config", str(c1), "--out", str(tmp_path / "o1")) == 0
        assert run_cli("solve", "--config", str(c2), "--out", str(tmp_path / "o2")) == 0
        h1 = json.loads((tmp_path / "o1" / "manifest.json").read_text())["config_hash"]
        h2 = json.loads((tmp_path / "o2" / "manifest.json").read_text())["config_hash"]
        assert h1 == h2


class TestEnergiesCommand:
    def test_csv_columns(self, tmp_path):
        status = run_cli(
            "energies", "--j", "2", "--K", "8", "--s", "-0.5", "--N", "4",
            "--dt", "1e-3", "--T", "0.01", "--samples", "4", "--out", str(tmp_path),
        )
        assert status == 0
        header = (tmp_path / "energies.csv").read_text().splitlines()[0]
        assert header == "t,E2,E3,E4,Lambda5M5"

    def test_quintic_cap_skips_column(self, tmp_path, capsys):
        status = run_cli(
            "energies", "--j", "1", "--K", "20", "--s", "-0.5", "--N", "4",
            "--dt", "1e-3", "--T", "0.01", "--samples", "2", "--out", str(tmp_path),
        )
        assert status == 0
        assert "quintic cap" in capsys.readouterr().out
        body = (tmp_path / "energies.csv").read_text().splitlines()[1]
        assert body.endswith("nan")


class TestSqueezeCommand:
    def test_witness_artifacts(self, tmp_path):
        status = run_cli(
            "squeeze", "--j", "2", "--K", "8", "--N_list", "8", "--k0", "2",
            "--radius", "0.5", "--r", "0.1", "--T", "0", "--samples", "8",
            "--n_ascent", "20", "--seed", "1", "--out", str(tmp_path),
        )
        assert status == 0
        assert (tmp_path / "witness.json").exists()
        assert (tmp_path / "squeeze.csv").exists()
