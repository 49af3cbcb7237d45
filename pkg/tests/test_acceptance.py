"""
End-to-end checks of the reproduced curves: analytic anchors, the DL/SU(1,1) crossover, the approximate
DL QFI fit, access ordering and the Cramer-Rao inequality. These run full sweeps and are marked slow.
"""

import math

import numpy as np
import pytest

from absorption_qfi.core.configurations import GainSpec, kappa_from_eta
from absorption_qfi.core.figures import reproduce_figure
from absorption_qfi.core.qfi import Access, Estimand, ic_two_mode_qfi
from absorption_qfi.core.run_config import load_config
from absorption_qfi.core.scenarios import Model, QfiMethod, Scenario, fit_dl_alpha
from absorption_qfi.core.sweep import FLAG_COLUMN, VALUE_COLUMN, Flag, crossover, fit_from_sweep, run_sweep

pytestmark = pytest.mark.slow

L = 4e7
GAINS = [0.1, 1.0, 10.0]
ETAS = [0.9, 0.5, 0.1, 0.02]
GRID = ["grid.count=60", "cache.enabled=false"]


def sweep(*updates):
    return run_sweep(load_config(overrides=GRID + list(updates)))


@pytest.fixture(scope="module")
def full_access():
    return {model: sweep(f"run.model={model}") for model in ("su11", "dl")}


@pytest.mark.parametrize("n_peak", GAINS)
@pytest.mark.parametrize("eta", ETAS)
def test_numeric_full_access_matches_closed_form(n_peak, eta):
    numeric = Scenario(estimand=Estimand.ETA_I, method=QfiMethod.NUMERIC).qfi(GainSpec(n_peak), eta)
    assert numeric.value == pytest.approx(n_peak / (eta * (1 - eta)), rel=1e-6)


@pytest.mark.parametrize("n_peak", GAINS)
@pytest.mark.parametrize("eta", ETAS)
def test_numeric_ic_two_mode_matches_closed_form(n_peak, eta):
    kappa = kappa_from_eta(eta, L)
    scenario = Scenario(model=Model.IC, access=Access.IC_TWO_MODE, method=QfiMethod.NUMERIC)
    assert scenario.qfi(GainSpec(n_peak), kappa).value == pytest.approx(ic_two_mode_qfi(n_peak, kappa, L), rel=1e-6)


@pytest.mark.parametrize("model", list(Model))
def test_photon_counting_saturates_single_mode_qfi(model):
    scenario = Scenario(model=model, access=Access.SINGLE_MODE)
    for n_peak in GAINS:
        for eta in ETAS:
            kappa = kappa_from_eta(eta, L)
            gain = GainSpec(n_peak)
            assert scenario.single_mode_inverse_error(gain, kappa) == pytest.approx(
                scenario.qfi(gain, kappa).value, rel=1e-10
            )


def test_halving_step_keeps_dl_qfi():
    gain, kappa = GainSpec(1.0), kappa_from_eta(0.1, L)
    coarse = Scenario(model=Model.DL).qfi(gain, kappa).value
    fine = Scenario(model=Model.DL, fd_rel_step=5e-7, fd_abs_step=5e-13).qfi(gain, kappa).value
    assert fine == pytest.approx(coarse, rel=1e-6)


def test_full_access_crossover(full_access):
    points = crossover(full_access["dl"], full_access["su11"])
    assert sorted(points) == GAINS
    for kappa in points.values():
        assert 5e-8 <= kappa <= 2e-7


def test_single_mode_crossover():
    dl = sweep("run.model=dl", "run.access=single_mode")
    su11 = sweep("run.model=su11", "run.access=single_mode")
    for kappa in crossover(dl, su11).values():
        assert 5e-8 <= kappa <= 2e-7


def test_alpha_fit():
    result = sweep("run.model=dl", "run.quantity=inverse_ratio")
    report = fit_from_sweep(result, L)
    assert 1.05 <= report.alpha <= 1.15
    assert report.r_squared >= 0.995


def test_fit_dl_alpha_on_point_grid():
    kappas = np.geomspace(kappa_from_eta(0.99, L), kappa_from_eta(0.001, L), 12)
    report = fit_dl_alpha([(kappa, n_peak) for n_peak in GAINS for kappa in kappas], length=L)
    assert 1.05 <= report.alpha <= 1.15
    assert report.r_squared >= 0.995


def test_access_ordering():
    single = sweep("run.model=ic", "run.access=single_mode").frame[VALUE_COLUMN].to_numpy()
    two_mode = sweep("run.model=ic", "run.access=ic_two_mode").frame[VALUE_COLUMN].to_numpy()
    full = sweep("run.model=ic").frame[VALUE_COLUMN].to_numpy()
    assert np.all(single <= two_mode * (1 + 1e-9))
    assert np.all(two_mode < full)


@pytest.mark.parametrize("model", ["su11", "dl"])
def test_cramer_rao(model, full_access):
    inverse_error = sweep(f"run.model={model}", "run.quantity=inverse_error").frame
    ok = (inverse_error[FLAG_COLUMN] == Flag.OK.value).to_numpy()
    qfi = full_access[model].frame[VALUE_COLUMN].to_numpy()
    assert np.all(inverse_error[VALUE_COLUMN].to_numpy()[ok] <= qfi[ok] * (1 + 1e-9))


def test_dl_inverse_error_dips():
    frame = sweep("run.model=dl", "run.quantity=inverse_error").frame
    for _, curve in frame.groupby("gain_Npeak"):
        assert (curve[FLAG_COLUMN] == Flag.VANISHING_DERIVATIVE.value).any()


def test_reproduce_writes_csv_and_svg(tmp_path):
    cfg = load_config(overrides=["grid.count=8", "grid.gains=[1.0]"])
    written = reproduce_figure("fig2c", tmp_path, cfg)
    names = {path.name for path in written}
    assert names == {"fig2c.csv", "fig2c.svg"}
    text = (tmp_path / "fig2c.csv").read_text()
    assert "# quantity: log10_ratio" in text
    assert not math.isnan(float(text.strip().splitlines()[-1].split(",")[3]))
