"""Tests for measurement scenarios: access, estimands and the evaluated quantities."""

import math

import pytest

from absorption_qfi.core.configurations import GainSpec, ICMoments
from absorption_qfi.core.qfi import (
    Access,
    Estimand,
    Method,
    ic_two_mode_qfi,
    su11_full_access_qfi_kappa,
)
from absorption_qfi.core.scenarios import Model, QfiMethod, Quantity, Scenario, alpha_curve, fit_dl_alpha
from absorption_qfi.error_handling.exceptions import DivergentQfi, ParameterError

L = 4e7
KAPPA = 1e-8
GAIN = GainSpec(1.0)


class TestConstruction:
    def test_ic_two_mode_needs_ic(self):
        with pytest.raises(ParameterError, match="ic_two_mode"):
            Scenario(model=Model.SU11, access=Access.IC_TWO_MODE)

    def test_no_intensity_difference_for_ic(self):
        with pytest.raises(ParameterError):
            Scenario(model=Model.IC, quantity=Quantity.INVERSE_ERROR)

    def test_inverse_ratio_needs_full_access(self):
        with pytest.raises(ParameterError):
            Scenario(model=Model.DL, access=Access.SINGLE_MODE, quantity=Quantity.INVERSE_RATIO)

    @pytest.mark.parametrize("eta_s", [-0.1, 1.5])
    def test_signal_transmission_range(self, eta_s):
        with pytest.raises(ParameterError):
            Scenario(eta_s=eta_s)

    def test_parameter_bookkeeping(self):
        scenario = Scenario(estimand=Estimand.ETA_I)
        eta = scenario.epsilon_of(KAPPA)
        assert eta == pytest.approx(math.exp(-KAPPA * L))
        assert scenario.kappa_of(eta) == pytest.approx(KAPPA, rel=1e-12)
        assert Scenario().epsilon_of(KAPPA) == KAPPA


class TestPumpPhase:
    def test_su11_anti_squeezing_at_phase_match(self):
        assert Scenario().pump_phase(GAIN) == pytest.approx(math.pi)

    def test_ic_dark_arm_at_phase_match(self):
        assert Scenario(model=Model.IC).pump_phase(GAIN) == pytest.approx(math.pi / 2)

    def test_explicit_phase_wins(self):
        assert Scenario(phi_p2=0.25).pump_phase(GAIN) == 0.25


class TestQfi:
    def test_analytic_full_access_kappa(self):
        result = Scenario().qfi(GAIN, 1e-7)
        assert result.method == Method.ANALYTIC
        assert result.value == pytest.approx(su11_full_access_qfi_kappa(1.0, 1e-7, L), rel=1e-12)

    def test_analytic_full_access_eta(self):
        result = Scenario(estimand=Estimand.ETA_I).qfi(GAIN, 0.5)
        assert result.estimand == Estimand.ETA_I
        assert result.value == pytest.approx(1.0 / (0.5 * 0.5), rel=1e-12)

    def test_numeric_matches_analytic_full_access(self):
        analytic = Scenario().qfi(GAIN, KAPPA)
        numeric = Scenario(method=QfiMethod.NUMERIC).qfi(GAIN, KAPPA)
        assert numeric.method == Method.NUMERIC
        assert numeric.value == pytest.approx(analytic.value, rel=1e-5)

    def test_numeric_matches_analytic_ic_two_mode(self):
        scenario = Scenario(model=Model.IC, access=Access.IC_TWO_MODE, method=QfiMethod.NUMERIC)
        numeric = scenario.qfi(GAIN, KAPPA)
        assert numeric.value == pytest.approx(ic_two_mode_qfi(1.0, KAPPA, L), rel=1e-5)

    def test_ic_two_mode_eta_estimand_is_reparametrized(self):
        eta = math.exp(-KAPPA * L)
        scenario = Scenario(model=Model.IC, access=Access.IC_TWO_MODE, estimand=Estimand.ETA_I)
        value = scenario.qfi(GAIN, eta).value
        assert value == pytest.approx(ic_two_mode_qfi(1.0, KAPPA, L) / (L * eta) ** 2, rel=1e-10)

    def test_signal_loss_forces_numeric(self):
        result = Scenario(eta_s=0.9).qfi(GAIN, KAPPA)
        assert result.method == Method.NUMERIC
        assert 0 < result.value < Scenario().qfi(GAIN, KAPPA).value

    def test_zero_decay_rate_diverges(self):
        with pytest.raises(DivergentQfi):
            Scenario().qfi(GAIN, 0.0)

    def test_dl_is_positive_and_numeric(self):
        result = Scenario(model=Model.DL).qfi(GAIN, KAPPA)
        assert result.method == Method.NUMERIC
        assert result.value > 0

    def test_analytic_request_without_closed_form_falls_back(self, caplog):
        result = Scenario(model=Model.DL, method=QfiMethod.ANALYTIC).qfi(GAIN, KAPPA)
        assert result.method == Method.NUMERIC
        assert "falling back" in caplog.text

    def test_access_ordering_for_ic(self):
        single = Scenario(model=Model.IC, access=Access.SINGLE_MODE).qfi(GAIN, KAPPA).value
        two_mode = Scenario(model=Model.IC, access=Access.IC_TWO_MODE).qfi(GAIN, KAPPA).value
        full = Scenario(model=Model.IC).qfi(GAIN, KAPPA).value
        assert single <= two_mode * (1 + 1e-6)
        assert two_mode <= full * (1 + 1e-6)


class TestMeasurements:
    def test_photon_counting_saturates_single_mode_qfi(self):
        scenario = Scenario(access=Access.SINGLE_MODE)
        assert scenario.single_mode_inverse_error(GAIN, KAPPA) == pytest.approx(
            scenario.qfi(GAIN, KAPPA).value, rel=1e-8
        )

    @pytest.mark.parametrize("model", [Model.SU11, Model.DL])
    def test_intensity_difference_obeys_cramer_rao(self, model):
        inverse_error = Scenario(model=model, quantity=Quantity.INVERSE_ERROR).evaluate(GAIN, KAPPA)
        qfi = Scenario(model=model).qfi(GAIN, KAPPA).value
        assert 0 < inverse_error <= qfi * (1 + 1e-6)

    def test_ic_has_no_signal_idler_pair(self):
        with pytest.raises(ParameterError):
            Scenario(model=Model.IC).signal_idler_moments(GAIN, KAPPA)

    def test_inverse_ratio_positive_for_dl(self):
        value = Scenario(model=Model.DL, quantity=Quantity.INVERSE_RATIO).evaluate(GAIN, KAPPA)
        assert value > 0


class TestDescribe:
    def test_su11_keys(self):
        values = Scenario().describe(GAIN, KAPPA)
        assert set(values) == {"model", "gain_Npeak", "kappa_i_nm^-1", "eta_i", "n_s", "n_i", "m", "phi_p2"}
        assert len(values["m"]) == 2

    def test_ic_reports_beamsplitter_arms(self):
        values = Scenario(model=Model.IC).describe(GAIN, KAPPA)
        assert {"n_a", "n_plus", "n_minus", "m_ai"} <= set(values)
        assert isinstance(Scenario(model=Model.IC).output_moments(GAIN, KAPPA), ICMoments)

    def test_dl_has_no_pump_phase(self):
        assert "phi_p2" not in Scenario(model=Model.DL).describe(GAIN, KAPPA)


def test_fit_dl_alpha_needs_three_gains():
    with pytest.raises(ParameterError):
        fit_dl_alpha([(1e-8, 0.1), (2e-8, 1.0), (3e-8, 1.0)], length=L)


def test_alpha_curve():
    assert alpha_curve(KAPPA, 1.1, Estimand.KAPPA_I, L) == pytest.approx(1.1e-16, rel=1e-12, abs=0)
    eta = math.exp(-KAPPA * L)
    assert alpha_curve(KAPPA, 1.1, Estimand.ETA_I, L) == pytest.approx(1.1e-16 * (L * eta) ** 2, rel=1e-12)
