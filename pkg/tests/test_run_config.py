"""Tests for run configuration loading, overrides and hashing."""

import math
from pathlib import Path

import pytest

from absorption_qfi.core.qfi import Access, Estimand
from absorption_qfi.core.run_config import RunConfig, load_config, parse_override
from absorption_qfi.core.scenarios import Model
from absorption_qfi.error_handling.exceptions import ConfigurationError

EXAMPLE_CONFIG = Path(__file__).resolve().parents[1] / "absorption_qfi" / "config" / "config.example.yaml"


class TestDefaults:
    def test_kappa_range_follows_transmission_bounds(self):
        cfg = RunConfig()
        assert cfg.grid.kappa_min == pytest.approx(-math.log(0.99) / 4e7, rel=1e-12)
        assert cfg.grid.kappa_max == pytest.approx(-math.log(0.001) / 4e7, rel=1e-12)
        kappas = cfg.grid.kappa_values()
        assert len(kappas) == 200
        assert kappas[0] == pytest.approx(cfg.grid.kappa_min, rel=1e-12)
        assert kappas[-1] == pytest.approx(cfg.grid.kappa_max, rel=1e-12)

    def test_scenario_from_defaults(self):
        scenario = RunConfig().to_scenario()
        assert scenario.model == Model.SU11
        assert scenario.access == Access.ALL_MODES
        assert scenario.estimand == Estimand.KAPPA_I
        assert scenario.phi_p2 is None
        assert scenario.omega == 0.0

    def test_phase_matched_omega(self):
        scenario = load_config(overrides=["spectral.omega=phase_matched"]).to_scenario()
        assert scenario.omega is None


class TestValidation:
    def test_empty_gains(self):
        with pytest.raises(ConfigurationError, match="grid.gains"):
            load_config(overrides=["grid.gains=[]"])

    def test_ic_two_mode_requires_ic(self):
        with pytest.raises(ConfigurationError, match="ic_two_mode"):
            load_config(overrides=["run.access=ic_two_mode"])

    def test_unknown_model(self):
        with pytest.raises(ConfigurationError, match="run.model"):
            load_config(overrides=["run.model=laser"])

    def test_extra_key_forbidden(self):
        with pytest.raises(ConfigurationError, match="grid.colour"):
            load_config(overrides=["grid.colour=blue"])

    def test_constant_taylor_term(self):
        with pytest.raises(ConfigurationError, match="constant Taylor coefficient"):
            load_config(overrides=["spectral.taylor_s=[1.0e-9, 2.0e-15]"])

    def test_inverted_kappa_range(self):
        with pytest.raises(ConfigurationError, match="kappa_min"):
            load_config(overrides=["grid.kappa_min=1.0e-7", "grid.kappa_max=1.0e-8"])

    def test_error_carries_exit_code(self):
        with pytest.raises(ConfigurationError) as excinfo:
            load_config(overrides=["loss.eta_s=2"])
        assert excinfo.value.exit_code == 2


class TestOverrides:
    def test_values_are_typed(self):
        cfg = load_config(overrides=["grid.count=5", "grid.gains=[0.5, 2]", "sweep.plot=false", "phases.phi_p2=0.3"])
        assert cfg.grid.count == 5
        assert cfg.grid.gains == [0.5, 2.0]
        assert cfg.sweep.plot is False
        assert cfg.phases.phi_p2 == 0.3

    def test_parse_override(self):
        assert parse_override("run.model = ic") == {"run.model": "ic"}

    @pytest.mark.parametrize("text", ["run.model", "model=ic", "a.b.c=1"])
    def test_malformed(self, text):
        with pytest.raises(ConfigurationError):
            load_config(overrides=[text])

    def test_derive_revalidates(self):
        cfg = RunConfig()
        derived = cfg.derive({"run.model": "ic", "run.access": "ic_two_mode"})
        assert derived.run.access == "ic_two_mode"
        assert cfg.run.model == "su11"
        with pytest.raises(ConfigurationError):
            cfg.derive({"run.access": "ic_two_mode"})


class TestFiles:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_config(tmp_path / "absent.yaml")

    def test_bad_yaml_reports_line(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("run:\n  model: su11\ngrid: [1, 2\n")
        with pytest.raises(ConfigurationError, match="line"):
            load_config(path)

    def test_root_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigurationError, match="mapping"):
            load_config(path)

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path).config_hash() == RunConfig().config_hash()

    def test_overrides_apply_on_top_of_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("grid:\n  count: 7\n")
        cfg = load_config(path, ["grid.count=9"])
        assert cfg.grid.count == 9


class TestHash:
    def test_stable_and_short(self):
        first, second = RunConfig().config_hash(), RunConfig().config_hash()
        assert first == second
        assert len(first) == 16
        int(first, 16)

    def test_execution_settings_do_not_change_hash(self):
        base = RunConfig().config_hash()
        assert load_config(overrides=["sweep.workers=4"]).config_hash() == base
        assert load_config(overrides=["cache.enabled=false"]).config_hash() == base
        assert load_config(overrides=["logging.level=DEBUG"]).config_hash() == base

    def test_result_settings_change_hash(self):
        base = RunConfig().config_hash()
        assert load_config(overrides=["grid.count=10"]).config_hash() != base
        assert load_config(overrides=["run.model=dl"]).config_hash() != base

    def test_example_config_matches_defaults(self):
        assert load_config(EXAMPLE_CONFIG).config_hash() == RunConfig().config_hash()
