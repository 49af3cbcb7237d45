"""Tests for the command line interface: outputs, exit codes and error objects."""

import io
import json
import math

import numpy as np
import pandas as pd
import pytest

from absorption_qfi.core.cli import build_parser, main
from absorption_qfi.core.qfi import su11_full_access_qfi_kappa
from absorption_qfi.core.sweep import COLUMNS, SweepResult

L = 4e7
SMALL_GRID = ["--set", "grid.count=3", "--set", "grid.gains=[1.0]"]


def error_object(err: str) -> dict:
    return json.loads(err.strip().splitlines()[-1])


def write_ratio_sweep(path, quantity="inverse_ratio"):
    kappas = np.geomspace(1e-9, 1e-7, 8)
    rows = [(k, math.exp(-k * L), g, 1.1 * k**2, "ok") for g in (0.1, 1.0, 10.0) for k in kappas]
    metadata = {"quantity": quantity, "estimand": "kappa", "length_nm": repr(L)}
    SweepResult(frame=pd.DataFrame(rows, columns=COLUMNS), metadata=metadata).write_csv(path)
    return path


class TestPointCommands:
    def test_moments_csv(self, capsys):
        assert main(["moments", "--gain", "1.0", "--kappa", "1e-8"]) == 0
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert {"n_s", "n_i", "m_re", "m_im", "phi_p2"} <= set(frame.columns)
        assert frame.loc[0, "model"] == "su11"

    def test_qfi_json_from_transmission(self, capsys):
        assert main(["qfi", "--gain", "1.0", "--eta", "0.5", "--format", "json"]) == 0
        record = json.loads(capsys.readouterr().out)[0]
        kappa = -math.log(0.5) / L
        assert record["qfi"] == pytest.approx(su11_full_access_qfi_kappa(1.0, kappa, L), rel=1e-12)
        assert record["method"] == "analytic"

    def test_kappa_and_eta_are_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["qfi", "--gain", "1", "--kappa", "1e-8", "--eta", "0.5"])

    def test_bad_override_exits_with_configuration_code(self, capsys):
        assert main(["qfi", "--gain", "1", "--kappa", "1e-8", "--set", "run.model=laser"]) == 2
        assert error_object(capsys.readouterr().err)["code"] == -32004

    def test_negative_gain(self, capsys):
        assert main(["moments", "--gain", "-1", "--kappa", "1e-8"]) == 2

    def test_divergent_qfi_exits_with_numerical_code(self, capsys):
        assert main(["qfi", "--gain", "1", "--kappa", "0"]) == 3
        error = error_object(capsys.readouterr().err)
        assert error["data"]["exception"] == "DivergentQfi"
        assert error["data"]["value"] == "inf"


class TestSweepCommands:
    def test_sweep_to_directory(self, tmp_path):
        assert main(["sweep", "--out", str(tmp_path)] + SMALL_GRID) == 0
        result = SweepResult.read_csv(tmp_path / "sweep_su11_all_kappa_qfi.csv")
        assert len(result.frame) == 3
        assert result.metadata["model"] == "su11"

    def test_workers_flag_sets_configuration(self, mocker, capsys):
        run_sweep = mocker.patch("absorption_qfi.core.cli.run_sweep")
        run_sweep.return_value.to_csv_text.return_value = "value\n1.0\n"
        assert main(["sweep", "--workers", "3"]) == 0
        cfg = run_sweep.call_args.args[0]
        assert cfg.sweep.workers == 3
        assert capsys.readouterr().out == "value\n1.0\n"

    def test_crossover_needs_both_files(self, tmp_path, capsys):
        path = write_ratio_sweep(tmp_path / "a.csv")
        assert main(["crossover", str(path)]) == 2

    def test_crossover_flags_gains_that_never_cross(self, tmp_path, capsys):
        kappas = np.geomspace(1e-9, 1e-7, 8)
        paths = []
        for name, value_of in (("dl", lambda k, g: k), ("su11", lambda k, g: 5e-9 if g == 1.0 else 1.0)):
            rows = [(k, math.exp(-k * L), g, value_of(k, g), "ok") for g in (1.0, 10.0) for k in kappas]
            result = SweepResult(frame=pd.DataFrame(rows, columns=COLUMNS), metadata={"length_nm": repr(L)})
            paths.append(str(result.write_csv(tmp_path / f"{name}.csv")))
        assert main(["crossover"] + paths) == 0
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert list(frame["flag"]) == ["ok", "no_crossover"]
        assert frame.loc[0, "kappa_i_nm^-1"] == pytest.approx(5e-9, rel=1e-9)
        assert math.isnan(frame.loc[1, "kappa_i_nm^-1"])

    def test_fit_alpha_from_csv(self, tmp_path, capsys):
        path = write_ratio_sweep(tmp_path / "ratio.csv")
        assert main(["fit-alpha", "--from-csv", str(path), "--format", "json"]) == 0
        record = json.loads(capsys.readouterr().out)[0]
        assert record["alpha"] == pytest.approx(1.1, rel=1e-6)
        assert record["estimand"] == "kappa"
        assert len(record["r_squared_per_gain"]) == 3

    def test_fit_alpha_rejects_other_sweeps(self, tmp_path, capsys):
        path = write_ratio_sweep(tmp_path / "qfi.csv", quantity="qfi")
        assert main(["fit-alpha", "--from-csv", str(path)]) == 2

    def test_reproduce_writes_to_out(self, mocker, tmp_path, capsys):
        reproduce = mocker.patch("absorption_qfi.core.cli.reproduce_figure", return_value=[tmp_path / "fig2a.csv"])
        assert main(["reproduce", "fig2a", "--out", str(tmp_path)]) == 0
        assert reproduce.call_args.args[:2] == ("fig2a", str(tmp_path))
        assert capsys.readouterr().out.strip() == str(tmp_path / "fig2a.csv")


class TestInvariantsCommand:
    def test_report_file(self, tmp_path):
        assert main(["invariants", "--draws", "3", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "invariants.csv").read_text().startswith("# seed: 20250101\n")

    def test_seed_override(self, capsys):
        assert main(["invariants", "--draws", "2", "--set", "run.seed=5"]) == 0
        assert capsys.readouterr().out.startswith("# seed: 5\n")

    def test_failure_exits_with_numerical_code(self, mocker, capsys):
        report = mocker.patch("absorption_qfi.core.cli.run_invariants").return_value
        report.passed = False
        report.failures.return_value = ["composition"]
        report.metadata = {"seed": "1"}
        report.frame = pd.DataFrame({"check": ["composition"]})
        assert main(["invariants"]) == 3
        assert "composition" in error_object(capsys.readouterr().err)["message"]


def test_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "absorption-qfi" in capsys.readouterr().out
