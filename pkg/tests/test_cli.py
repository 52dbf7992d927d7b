import json
import math

import pytest

from fracdamp.cli import main


def run_cli(*args):
    return main([str(a) for a in args])


class TestVerifyKernel:
    def test_default_grid_passes(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli("verify-kernel", "--beta", 0.5, "--out", out)
        assert code == 0
        lines = (out / "kernel.csv").read_text().splitlines()
        assert lines[0] == "tau,quadrature,exact,rel_error"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "verify-kernel"
        assert "input_hash" in manifest and "kernel_backend" in manifest

    def test_beta_09_passes(self, tmp_path):
        assert run_cli("verify-kernel", "--beta", 0.9, "--out", tmp_path / "b9") == 0

    def test_unresolved_grid_fails_threshold(self, tmp_path, capsys):
        code = run_cli(
            "verify-kernel", "--beta", 0.5, "--nxi", 16, "--xi-min", 0.05,
            "--xi-max", 20, "--out", tmp_path / "bad",
        )
        assert code == 4


class TestSimulate:
    def test_small_run_writes_artifacts(self, tmp_path):
        out = tmp_path / "sim"
        code = run_cli(
            "simulate", "--problem", "P", "--alpha", 0.5, "--beta", 0.5,
            "--rho", 1, "--nx", 48, "--nxi", 32, "--t-final", 2.0,
            "--dt", 0.01, "--out", out,
        )
        assert code == 0
        lines = (out / "trace.csv").read_text().splitlines()
        assert lines[0] == "t,E,D,flux_re,flux_im"
        fit = json.loads((out / "fit.json").read_text())
        assert set(fit) >= {"window", "exponent", "intercept", "r_squared"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["spec"]["variant"] == "P"

    def test_zero_preset_trace_is_zero(self, tmp_path):
        out = tmp_path / "zero"
        code = run_cli(
            "simulate", "--problem", "P", "--alpha", 0.5, "--beta", 0.5,
            "--nx", 32, "--nxi", 24, "--t-final", 1.0, "--dt", 0.01,
            "--y0", "zero", "--out", out,
        )
        assert code == 0
        rows = (out / "trace.csv").read_text().splitlines()[1:]
        assert all(float(r.split(",")[1]) == 0.0 for r in rows)

    def test_invalid_variant_alpha_combination(self, tmp_path):
        code = run_cli(
            "simulate", "--problem", "P", "--alpha", 1.5, "--beta", 0.5,
            "--t-final", 1.0, "--out", tmp_path / "bad",
        )
        assert code == 2

    def test_reproducible_reruns(self, tmp_path):
        args = (
            "simulate", "--problem", "P", "--alpha", 0.5, "--beta", 0.5,
            "--nx", 32, "--nxi", 24, "--t-final", 1.0, "--dt", 0.01,
        )
        assert run_cli(*args, "--out", tmp_path / "a") == 0
        assert run_cli(*args, "--out", tmp_path / "b") == 0
        assert (tmp_path / "a/trace.csv").read_bytes() == (tmp_path / "b/trace.csv").read_bytes()
        assert (tmp_path / "a/fit.json").read_bytes() == (tmp_path / "b/fit.json").read_bytes()
        ma = json.loads((tmp_path / "a/manifest.json").read_text())
        mb = json.loads((tmp_path / "b/manifest.json").read_text())
        assert ma["input_hash"] == mb["input_hash"]

    def test_config_file_merge_flags_win(self, tmp_path):
        cfg = tmp_path / "spec.json"
        cfg.write_text(json.dumps(
            {"variant": "P", "alpha": 0.5, "beta": 0.25, "rho": 1.0, "gamma": 0.0}
        ))
        out = tmp_path / "cfg"
        code = run_cli(
            "simulate", "--config", cfg, "--beta", 0.5, "--nx", 32, "--nxi", 24,
            "--t-final", 1.0, "--dt", 0.01, "--out", out,
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["spec"]["beta"] == 0.5  # flag overrides file


class TestScan:
    def test_stub_closed_form(self, tmp_path):
        out = tmp_path / "stub"
        code = run_cli(
            "scan", "--problem", "stub", "--nx", 12, "--points", 10,
            "--lambda-min", 1e-3, "--lambda-max", 1e-1, "--out", out,
        )
        assert code == 0
        rows = (out / "scan.csv").read_text().splitlines()[1:]
        for row in rows:
            lam, norm = (float(v) for v in row.split(","))
            assert norm == pytest.approx(1.0 / math.sqrt(1.0 + lam**2), rel=1e-7)
        fit = json.loads((out / "fit.json").read_text())
        assert set(fit) == {
            "regime", "exponent", "r_squared", "window",
            "theta_theoretical", "upsilon_theoretical", "decay_exponent_predicted",
        }

    def test_variant_p_scan_small(self, tmp_path):
        out = tmp_path / "scanp"
        code = run_cli(
            "scan", "--problem", "P", "--alpha", 0.5, "--beta", 0.5,
            "--nx", 100, "--nxi", 64, "--points", 13, "--out", out,
        )
        assert code == 0
        fit = json.loads((out / "fit.json").read_text())
        assert fit["theta_theoretical"] == 1.0
        assert fit["decay_exponent_predicted"] == 2.0
        assert fit["exponent"] == pytest.approx(-1.0, abs=0.15)

    def test_general_coefficient_prediction(self, tmp_path):
        out = tmp_path / "scang"
        code = run_cli(
            "scan", "--problem", "Pprime", "--alpha", 1.5, "--beta", 0.5,
            "--nx", 64, "--nxi", 48, "--points", 10, "--out", out,
        )
        assert code == 0
        fit = json.loads((out / "fit.json").read_text())
        assert fit["theta_theoretical"] == 1.5
        assert fit["decay_exponent_predicted"] == pytest.approx(2.0 / 1.5)

    def test_high_regime_scan(self, tmp_path):
        out = tmp_path / "scanh"
        code = run_cli(
            "scan", "--problem", "Pprime", "--alpha", 0.5, "--beta", 0.5,
            "--nx", 100, "--nxi", 48, "--points", 10, "--regime", "high",
            "--lambda-min", 10, "--lambda-max", 1e3, "--out", out,
        )
        assert code == 0
        fit = json.loads((out / "fit.json").read_text())
        assert fit["regime"] == "high_frequency"

    def test_stub_rejected_outside_scan(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("simulate", "--problem", "stub", "--beta", 0.5,
                    "--t-final", 1.0, "--out", tmp_path / "x")
        assert exc.value.code == 2

    def test_numerical_failure_exit_code(self, tmp_path, monkeypatch):
        from fracdamp import cli
        from fracdamp.errors import NumericalError

        def boom(*args, **kwargs):
            raise NumericalError("synthetic failure", {"lambda": 0.1})

        monkeypatch.setattr(cli, "scan_resolvent", boom)
        out = tmp_path / "fail"
        code = run_cli(
            "scan", "--problem", "P", "--alpha", 0.5, "--beta", 0.5,
            "--nx", 32, "--nxi", 24, "--points", 8, "--out", out,
        )
        assert code == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["error"]["message"] == "synthetic failure"


class TestOracleCompare:
    def test_errors_decrease(self, tmp_path):
        out = tmp_path / "oc"
        code = run_cli(
            "oracle-compare", "--alpha", 0.5, "--beta", 0.5, "--lambda", 1e-3,
            "--nx-list", "50,100,200", "--nxi", 200, "--xi-max", 1e5,
            "--grade", 2, "--out", out,
        )
        assert code == 0
        rows = (out / "oracle.csv").read_text().splitlines()
        assert rows[0] == "lambda,l2_error,linf_error,nx"
        errs = [float(r.split(",")[1]) for r in rows[1:]]
        assert errs[0] > errs[1] > errs[2]

    def test_zero_data_zero_errors(self, tmp_path):
        out = tmp_path / "oc0"
        code = run_cli(
            "oracle-compare", "--alpha", 0.5, "--beta", 0.5, "--lambda", 1e-3,
            "--nx-list", "50,100", "--nxi", 64, "--data", "zero", "--out", out,
        )
        assert code == 0
        rows = (out / "oracle.csv").read_text().splitlines()[1:]
        assert all(float(r.split(",")[1]) == 0.0 for r in rows)

    def test_bad_nx_list_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("oracle-compare", "--alpha", 0.5, "--beta", 0.5,
                    "--lambda", 1e-3, "--nx-list", "fifty", "--out", tmp_path / "x")
        assert exc.value.code == 2
