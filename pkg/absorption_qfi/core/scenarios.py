"""
Measurement scenarios for absorption-qfi.
This module ties a sensing configuration (SU(1,1), IC, DL) to an access scenario and an estimand, and
evaluates the QFI, the intensity-difference inverse error or the inverse ratio at one (gain, parameter)
point. It is the unit of work of a sweep.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional, Sequence, Tuple, Union

from absorption_qfi.core.configurations import (
    DEFAULT_LENGTH_NM,
    DLParams,
    GainSpec,
    ICMoments,
    anti_squeeze_phase,
    dl_converged_order,
    dl_moments,
    eta_from_kappa,
    ic_balanced_bs,
    ic_moments,
    ic_optimal_phase,
    kappa_from_eta,
    su11_moments,
)
from absorption_qfi.core.numerics import DEFAULT_ABS_STEP, DEFAULT_REL_STEP, central_difference, default_step
from absorption_qfi.core.qfi import (
    Access,
    CovarianceTwoMode,
    Estimand,
    FitReport,
    Method,
    QfiResult,
    covariance_from_moments,
    covariance_ic,
    fit_alpha,
    ic_two_mode_qfi,
    intensity_diff_error,
    intensity_error,
    inverse_ratio,
    moments_derivative,
    qfi_single_mode,
    qfi_two_mode,
    reparametrize,
    su11_full_access_qfi_eta,
    su11_full_access_qfi_kappa,
)
from absorption_qfi.core.spectral import DispersionProfile, PhaseMatching, evaluate_mismatch, phase_matched_frequency
from absorption_qfi.core.twinbeam import LossChannel, Moments, apply_loss, propagator, vacuum_moments
from absorption_qfi.error_handling.exceptions import DivergentQfi, ParameterError

logger = logging.getLogger(__name__)


class Model(str, Enum):
    SU11 = "su11"
    IC = "ic"
    DL = "dl"


class Quantity(str, Enum):
    QFI = "qfi"
    INVERSE_ERROR = "inverse_error"
    INVERSE_RATIO = "inverse_ratio"


class QfiMethod(str, Enum):
    AUTO = "auto"
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class Scenario:
    """
    A configuration, an access scenario, an estimand and the quantity to evaluate.

    The sweep parameter epsilon is kappa_I (nm^-1) for Estimand.KAPPA_I and eta_I for Estimand.ETA_I.
    phi_p2=None selects the anti-squeezing phase (SU(1,1)) or the dark-arm phase (IC).
    """

    model: Model = Model.SU11
    access: Access = Access.ALL_MODES
    estimand: Estimand = Estimand.KAPPA_I
    quantity: Quantity = Quantity.QFI
    length: float = DEFAULT_LENGTH_NM
    profile: DispersionProfile = field(default_factory=DispersionProfile)
    omega: Optional[float] = 0.0
    eta_s: float = 1.0
    phi_s: float = 0.0
    phi_i: float = 0.0
    phi_p2: Optional[float] = None
    kappa_s: float = 0.0
    quadrature_points: int = 32
    method: QfiMethod = QfiMethod.AUTO
    fd_rel_step: float = DEFAULT_REL_STEP
    fd_abs_step: float = DEFAULT_ABS_STEP

    def __post_init__(self) -> None:
        if self.access == Access.IC_TWO_MODE and self.model != Model.IC:
            raise ParameterError("The ic_two_mode access scenario exists only for the IC model")
        if self.quantity == Quantity.INVERSE_ERROR and self.model == Model.IC:
            raise ParameterError("Intensity-difference errors are defined for the SU(1,1) and DL models only")
        if self.quantity == Quantity.INVERSE_RATIO and self.access != Access.ALL_MODES:
            raise ParameterError("Inverse ratios use the full-access QFI")
        if not 0.0 <= self.eta_s <= 1.0:
            raise ParameterError(f"eta_s must lie in [0, 1], got {self.eta_s}")
        if self.length <= 0:
            raise ParameterError(f"length must be positive, got {self.length}")

    @cached_property
    def detuning(self) -> float:
        if self.omega is None:
            return phase_matched_frequency(self.profile)
        return self.omega

    # Parameter bookkeeping

    def kappa_of(self, epsilon: float) -> float:
        if self.estimand == Estimand.KAPPA_I:
            return epsilon
        return kappa_from_eta(epsilon, self.length)

    def eta_of(self, epsilon: float) -> float:
        if self.estimand == Estimand.ETA_I:
            return epsilon
        return eta_from_kappa(epsilon, self.length)

    def epsilon_of(self, kappa: float) -> float:
        if self.estimand == Estimand.KAPPA_I:
            return kappa
        return eta_from_kappa(kappa, self.length)

    def step(self, epsilon: float) -> float:
        return default_step(epsilon, self.fd_rel_step, self.fd_abs_step)

    # States

    def phase_matching(self, gain: GainSpec) -> PhaseMatching:
        return evaluate_mismatch(self.profile, self.detuning, gain.gamma_abs(self.length))

    def channel(self, kappa: float) -> LossChannel:
        return LossChannel(
            eta_s=self.eta_s, eta_i=eta_from_kappa(kappa, self.length), phi_s=self.phi_s, phi_i=self.phi_i
        )

    def pump_phase(self, gain: GainSpec) -> float:
        if self.phi_p2 is not None:
            return self.phi_p2
        pm = self.phase_matching(gain)
        ch = LossChannel(phi_s=self.phi_s, phi_i=self.phi_i)
        if self.model == Model.IC:
            return ic_optimal_phase(pm, ch, self.length)
        return anti_squeeze_phase(pm, ch, self.length)

    def dl_params(self, kappa: float) -> DLParams:
        return DLParams(
            kappa_s=self.kappa_s, kappa_i=kappa, length=self.length, quadrature_points=self.quadrature_points
        )

    def before_second_pass(self, gain: GainSpec, kappa: float) -> Moments:
        """Signal-idler state after the first squeezer and the loss channel."""
        p = propagator(self.phase_matching(gain), gain.gamma_abs(self.length), self.length)
        return apply_loss(vacuum_moments(p), self.channel(kappa))

    def output_moments(
        self, gain: GainSpec, kappa: float, quadrature_order: Optional[int] = None
    ) -> Union[Moments, ICMoments]:
        """Moments leaving the configuration."""
        pm = self.phase_matching(gain)
        if self.model == Model.DL:
            return dl_moments(gain, pm, self.dl_params(kappa), quadrature_order)
        phi_p2 = self.pump_phase(gain)
        if self.model == Model.IC:
            return ic_moments(gain, pm, self.channel(kappa), phi_p2, self.length)
        return su11_moments(gain, pm, self.channel(kappa), phi_p2, self.length)

    def _order_at(self, gain: GainSpec, kappa: float) -> Optional[int]:
        if self.model != Model.DL:
            return None
        order = dl_converged_order(gain, self.phase_matching(gain), self.dl_params(kappa))
        logger.debug(f"DL quadrature fixed at {order} nodes for kappa={kappa:.6e}")
        return order

    def covariance(self, gain: GainSpec, epsilon: float, quadrature_order: Optional[int] = None) -> CovarianceTwoMode:
        """Two-mode covariance seen by the access scenario (full access or IC signal-ancilla)."""
        kappa = self.kappa_of(epsilon)
        pm = self.phase_matching(gain)
        if self.access == Access.IC_TWO_MODE:
            return covariance_ic(ic_moments(gain, pm, self.channel(kappa), self.pump_phase(gain), self.length))
        if self.model == Model.DL:
            return covariance_from_moments(dl_moments(gain, pm, self.dl_params(kappa), quadrature_order))
        return covariance_from_moments(self.before_second_pass(gain, kappa))

    def single_mode_occupation(self, gain: GainSpec, epsilon: float, quadrature_order: Optional[int] = None) -> float:
        """Occupation of the detected mode: SU(1,1)/DL signal or the dark IC beamsplitter arm."""
        out = self.output_moments(gain, self.kappa_of(epsilon), quadrature_order)
        if isinstance(out, ICMoments):
            return ic_balanced_bs(out, -1)
        return out.n_s

    def signal_idler_moments(self, gain: GainSpec, epsilon: float, quadrature_order: Optional[int] = None) -> Moments:
        out = self.output_moments(gain, self.kappa_of(epsilon), quadrature_order)
        if isinstance(out, ICMoments):
            raise ParameterError("The IC configuration has no single signal-idler pair at its output")
        return out

    # Quantities

    def _check_epsilon(self, epsilon: float) -> None:
        kappa = self.kappa_of(epsilon)
        if kappa <= 0:
            raise DivergentQfi(f"QFI diverges as kappa_I -> 0 (epsilon={epsilon})")

    def _analytic_available(self) -> bool:
        if self.model == Model.DL or self.access == Access.SINGLE_MODE:
            return False
        return self.eta_s == 1.0

    def _analytic_qfi(self, gain: GainSpec, epsilon: float) -> QfiResult:
        kappa = self.kappa_of(epsilon)
        n_vac = vacuum_moments(
            propagator(self.phase_matching(gain), gain.gamma_abs(self.length), self.length)
        ).n_s
        if self.access == Access.IC_TWO_MODE:
            value = ic_two_mode_qfi(n_vac, kappa, self.length)
            result = QfiResult(value, Estimand.KAPPA_I, self.access, Method.ANALYTIC)
            if self.estimand == Estimand.ETA_I:
                result = reparametrize(result, self.eta_of(epsilon), self.length)
            return result
        if self.estimand == Estimand.ETA_I:
            value = su11_full_access_qfi_eta(n_vac, epsilon)
        else:
            value = su11_full_access_qfi_kappa(n_vac, kappa, self.length)
        return QfiResult(value, self.estimand, self.access, Method.ANALYTIC)

    def qfi(self, gain: GainSpec, epsilon: float) -> QfiResult:
        """
        QFI at one point.

        Raises:
            DivergentQfi: At kappa_I = 0, or when the state is pure
        """
        self._check_epsilon(epsilon)
        if self.method != QfiMethod.NUMERIC and self._analytic_available():
            return self._analytic_qfi(gain, epsilon)
        if self.method == QfiMethod.ANALYTIC:
            logger.warning(
                f"No closed form for {self.model.value}/{self.access.value}; falling back to numeric QFI"
            )

        order = self._order_at(gain, self.kappa_of(epsilon))
        step = self.step(epsilon)
        if self.access == Access.SINGLE_MODE:
            return qfi_single_mode(
                lambda x: self.single_mode_occupation(gain, x, order), epsilon, step, estimand=self.estimand
            )
        return qfi_two_mode(
            lambda x: self.covariance(gain, x, order), epsilon, step, estimand=self.estimand, access=self.access
        )

    def single_mode_inverse_error(self, gain: GainSpec, epsilon: float) -> float:
        """Inverse error of a photon-number measurement on the detected mode."""
        self._check_epsilon(epsilon)
        order = self._order_at(gain, self.kappa_of(epsilon))

        def n_of(x: float) -> float:
            return self.single_mode_occupation(gain, x, order)

        dn = float(central_difference(n_of, epsilon, self.step(epsilon)))
        return 1.0 / intensity_error(n_of(epsilon), dn)

    def inverse_error(self, gain: GainSpec, epsilon: float) -> float:
        """
        Inverse error of an intensity-difference measurement, 1 / Delta^2 epsilon.

        Raises:
            VanishingDerivative: If d(N_S - N_I)/d epsilon vanishes
        """
        self._check_epsilon(epsilon)
        order = self._order_at(gain, self.kappa_of(epsilon))
        state = self.signal_idler_moments(gain, epsilon, order)
        slope = moments_derivative(lambda x: self.signal_idler_moments(gain, x, order), epsilon, self.step(epsilon))
        return 1.0 / intensity_diff_error(state, slope)

    def intensity_difference_slope(self, gain: GainSpec, epsilon: float) -> float:
        """d(N_S - N_I)/d epsilon, used to locate the dips of the inverse error."""
        order = self._order_at(gain, self.kappa_of(epsilon))
        slope = moments_derivative(lambda x: self.signal_idler_moments(gain, x, order), epsilon, self.step(epsilon))
        return slope.dn_s - slope.dn_i

    def inverse_ratio(self, gain: GainSpec, epsilon: float) -> float:
        """(N_S - N_I) / H with the full-access QFI."""
        h = self.qfi(gain, epsilon).value
        state = self.signal_idler_moments(gain, epsilon)
        return inverse_ratio(state.n_s - state.n_i, h)

    def evaluate(self, gain: GainSpec, epsilon: float) -> float:
        if self.quantity == Quantity.INVERSE_ERROR:
            return self.inverse_error(gain, epsilon)
        if self.quantity == Quantity.INVERSE_RATIO:
            return self.inverse_ratio(gain, epsilon)
        return self.qfi(gain, epsilon).value

    def describe(self, gain: GainSpec, kappa: float) -> Dict[str, Any]:
        """Output moments at one point as a JSON-friendly mapping."""
        out = self.output_moments(gain, kappa)
        values: Dict[str, Any] = {
            "model": self.model.value,
            "gain_Npeak": gain.n_peak,
            "kappa_i_nm^-1": kappa,
            "eta_i": eta_from_kappa(kappa, self.length),
        }
        if isinstance(out, ICMoments):
            values.update(
                n_s=out.n_s,
                n_i=out.n_i,
                n_a=out.n_a,
                n_sa=[out.n_sa.real, out.n_sa.imag],
                m_si=[out.m_si.real, out.m_si.imag],
                m_ai=[out.m_ai.real, out.m_ai.imag],
                n_plus=ic_balanced_bs(out, 1),
                n_minus=ic_balanced_bs(out, -1),
            )
        else:
            values.update(n_s=out.n_s, n_i=out.n_i, m=[out.m.real, out.m.imag])
        if self.model != Model.DL:
            values["phi_p2"] = self.pump_phase(gain)
        return values


def fit_dl_alpha(
    grid: Sequence[Tuple[float, float]],
    length: float = DEFAULT_LENGTH_NM,
    estimand: Estimand = Estimand.KAPPA_I,
    kappa_s: float = 0.0,
    quadrature_points: int = 32,
) -> FitReport:
    """
    Fit the approximate DL QFI H ~ (N_S - N_I) / (alpha kappa^2) over (kappa_I, gain) points.

    For the transmission estimand the ratio is fitted against alpha kappa^2 L^2 eta^2.

    Raises:
        ParameterError: If the grid holds fewer than three gain levels
    """
    if len({gain for _, gain in grid}) < 3:
        raise ParameterError("fit_dl_alpha needs at least three gain levels")
    scenario = Scenario(
        model=Model.DL,
        access=Access.ALL_MODES,
        estimand=estimand,
        quantity=Quantity.INVERSE_RATIO,
        length=length,
        kappa_s=kappa_s,
        quadrature_points=quadrature_points,
    )
    kappas, gains, ratios = [], [], []
    for kappa, n_peak in grid:
        epsilon = scenario.epsilon_of(kappa)
        ratio = scenario.inverse_ratio(GainSpec(n_peak), epsilon)
        if estimand == Estimand.ETA_I:
            ratio /= (length * scenario.eta_of(epsilon)) ** 2
        kappas.append(kappa)
        gains.append(n_peak)
        ratios.append(ratio)
    return fit_alpha(kappas, gains, ratios)


def alpha_curve(kappa: float, alpha: float, estimand: Estimand, length: float) -> float:
    """The fitted inverse ratio alpha kappa^2, times L^2 eta^2 for the transmission estimand."""
    value = alpha * kappa**2
    if estimand == Estimand.ETA_I:
        value *= (length * math.exp(-kappa * length)) ** 2
    return value
