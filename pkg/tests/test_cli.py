"""Tests for the ntkln command-line interface."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ntkln.cli import main


def run_cli(args, tmp_path):
    """Invoke main() in-process; returns (exit_code, output paths)."""
    code = main([str(a) for a in args])
    return code


class TestKernelCommand:
    def test_smoke(self, tmp_path):
        out = tmp_path / "k.csv"
        code = main(["kernel", "--arch", "relu:2", "--ln", "first",
                     "--x", "1", "--xp", "1", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,x_prime,theta"
        theta = float(lines[1].split(",")[2])
        assert math.isfinite(theta) and theta > 0

    def test_determinism(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["kernel", "--arch", "relu:2", "--ln", "first",
                "--x", "0.5,0.2", "--xp", "0.1,0.9"]
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_sigma_b_zero_is_config_error(self, tmp_path):
        code = main(["kernel", "--ln", "first", "--sigma-b", "0",
                     "--x", "1", "--xp", "1",
                     "--out", str(tmp_path / "k.csv")])
        assert code == 2

    def test_mismatched_vectors(self, tmp_path):
        code = main(["kernel", "--x", "1,2", "--xp", "1",
                     "--out", str(tmp_path / "k.csv")])
        assert code == 2


class TestSuiteCommands:
    def test_variance_curve(self, tmp_path):
        out = tmp_path / "v.csv"
        code = main(["variance-curve", "--ln", "first", "--norms", "1,10,100",
                     "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "norm,theta_xx"
        assert len(lines) == 4
        vals = [float(l.split(",")[1]) for l in lines[1:]]
        assert max(vals) - min(vals) < 1e-9 * max(vals)  # LN-first constancy
        manifest = json.loads((tmp_path / "v_manifest.json").read_text())
        assert manifest["command"] == "variance-curve"
        assert manifest["version"]

    def test_homogeneity(self, tmp_path):
        out = tmp_path / "h.csv"
        code = main(["homogeneity", "--x", "1", "--lambdas", "1e2,1e3,1e4",
                     "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "lambda,ratio"
        ratios = [float(l.split(",")[1]) for l in lines[1:]]
        assert ratios[-1] == pytest.approx(ratios[-2], rel=1e-2)

    def test_hermite_matches_closed_form(self, tmp_path):
        out = tmp_path / "h.json"
        code = main(["hermite", "--activation", "relu", "--order", "40",
                     "--rho", "0.5", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["abs_error"] < 1e-6

    def test_bound_check(self, tmp_path):
        out = tmp_path / "b.json"
        code = main(["bound-check", "--dataset", "sine", "--ln", "every",
                     "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["max_scanned_mean_le_bound_rkhs"] is True
        assert report["kernel_norm_ok"] is True

    def test_bound_check_requires_ln(self, tmp_path):
        code = main(["bound-check", "--dataset", "sine",
                     "--out", str(tmp_path / "b.json")])
        assert code == 2

    def test_fit_predict(self, tmp_path):
        out = tmp_path / "fp.csv"
        code = main(["fit-predict", "--dataset", "linear", "--ln", "first",
                     "--scan-points", "11", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,mean,ci_half_width"
        assert (tmp_path / "fp_train.csv").exists()

    def test_heatmap_small(self, tmp_path):
        out = tmp_path / "hm.csv"
        code = main(["heatmap", "--grid-lo", "-4", "--grid-hi", "4",
                     "--grid-step", "4", "--seeds", "2", "--width", "32",
                     "--ln", "first", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,x_prime,theta_mean,theta_std,n_seeds"
        assert len(lines) == 1 + 9
        assert (tmp_path / "hm_analytic.csv").exists()

    def test_train_toy_smoke(self, tmp_path):
        out = tmp_path / "t.csv"
        code = main(["train-toy", "--dataset", "linear", "--arch", "standard",
                     "--width", "16", "--epochs", "60", "--seeds", "2",
                     "--scan-points", "5", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,mean,ci_half_width"
        assert len(lines) == 6

    def test_config_file_flags_win(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("norms=1,10\nln=first\n")
        out = tmp_path / "v.csv"
        code = main(["variance-curve", "--config", str(cfg),
                     "--norms", "1,10,100", "--out", str(out)])
        assert code == 0
        assert len(out.read_text().splitlines()) == 4  # CLI norms won

    def test_config_file_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("frobnicate=1\n")
        with pytest.raises(SystemExit) as exc:
            main(["variance-curve", "--config", str(cfg),
                  "--out", str(tmp_path / "v.csv")])
        assert exc.value.code == 2

    def test_numerical_failure_exits_3(self, tmp_path):
        # Norm 1e300 overflows the stage-0 covariance to Inf.
        code = main(["variance-curve", "--norms", "1e300",
                     "--out", str(tmp_path / "v.csv")])
        assert code == 3

    def test_experiment_outputs_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["variance-curve", "--ln", "every", "--norms", "1,10,100,1e4"]
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_env_seed_in_manifest(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NTKLN_SEED", "11")
        out = tmp_path / "h.json"
        assert main(["hermite", "--activation", "relu", "--rho", "0.3",
                     "--out", str(out)]) == 0
        manifest = json.loads((tmp_path / "h_manifest.json").read_text())
        assert manifest["seeds"] == [11]


class TestEntryPoint:
    def test_help_lists_subcommands(self):
        proc = subprocess.run(
            [sys.executable, "-m", "ntkln.cli", "--help"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        for cmd in ("kernel", "heatmap", "variance-curve", "homogeneity",
                    "fit-predict", "bound-check", "train-toy", "hermite"):
            assert cmd in proc.stdout

    def test_missing_command_exits_2(self):
        proc = subprocess.run([sys.executable, "-m", "ntkln.cli"],
                              capture_output=True, text=True)
        assert proc.returncode == 2
