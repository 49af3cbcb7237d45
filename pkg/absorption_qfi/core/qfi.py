"""
Quantum Fisher information for absorption-qfi.
This module provides covariance-matrix construction for zero-mean Gaussian states, symplectic spectra,
the two-mode and single-mode QFI formulas, reparametrization between transmission and decay rate,
intensity-measurement error propagation and the least-squares core of the approximate DL QFI fit.

Covariances use the complex ordering (a_1, a_2, a_1^dag, a_2^dag) with sigma_ij = <r_i r_j^dag + r_j^dag r_i>,
so the vacuum is the identity and the symplectic form is K = diag(1, 1, -1, -1).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from absorption_qfi.core.configurations import ICMoments
from absorption_qfi.core.numerics import central_difference, default_step
from absorption_qfi.core.twinbeam import Moments, difference_variance, intensity_variance
from absorption_qfi.error_handling.exceptions import (
    DivergentQfi,
    IllConditioned,
    ParameterError,
    PureStateSingularity,
    UnphysicalState,
    VanishingDerivative,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-12
PHYSICAL_TOLERANCE = 1e-9
PURE_TOLERANCE = 1e-7
CONDITION_LIMIT = 1e12
DERIVATIVE_FLOOR = 1e-30
OCCUPATION_FLOOR = 1e-15
APPROXIMATE_DL_ALPHA = 1.1

SYMPLECTIC_FORM = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)


class Estimand(str, Enum):
    """Parameter being estimated."""

    ETA_I = "eta_i"
    KAPPA_I = "kappa_i"


class Access(str, Enum):
    """Which modes the measurement can reach."""

    ALL_MODES = "all_modes"
    IC_TWO_MODE = "ic_two_mode"
    SINGLE_MODE = "single_mode"


class Method(str, Enum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class QfiResult:
    """A QFI value with its estimand, access scenario and evaluation method."""

    value: float
    estimand: Estimand
    access: Access
    method: Method

    def __post_init__(self) -> None:
        if self.value < 0 and not math.isclose(self.value, 0.0, abs_tol=1e-12):
            raise ParameterError(f"QFI must be non-negative, got {self.value}")

    @property
    def divergent(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class FitReport:
    """Result of fitting (N_S - N_I) / H = alpha kappa^2."""

    alpha: float
    r_squared: float
    residuals: List[float] = field(default_factory=list)
    r_squared_per_gain: List[float] = field(default_factory=list)


def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a 2n x 2n covariance, sorted descending (1 for every mode of a pure state)."""
    n = sigma.shape[0] // 2
    form = np.diag(np.concatenate([np.ones(n), -np.ones(n)]))
    spectrum = np.sort(np.abs(np.linalg.eigvals(form @ sigma)))
    return spectrum[::2][::-1]


@dataclass(frozen=True, eq=False)
class CovarianceTwoMode:
    """4x4 Hermitian covariance of a zero-mean two-mode Gaussian state."""

    sigma: np.ndarray

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=complex)
        if sigma.shape != (4, 4):
            raise ParameterError(f"Two-mode covariance must be 4x4, got {sigma.shape}")
        object.__setattr__(self, "sigma", sigma)

    def validate(self) -> "CovarianceTwoMode":
        scale = max(1.0, float(np.max(np.abs(self.sigma))))
        if np.max(np.abs(self.sigma - self.sigma.conj().T)) > HERMITIAN_TOLERANCE * scale:
            raise UnphysicalState("Covariance matrix is not Hermitian")
        lowest = float(np.min(np.linalg.eigvalsh(self.sigma + SYMPLECTIC_FORM)))
        if lowest < -PHYSICAL_TOLERANCE * scale:
            raise UnphysicalState(f"sigma + K has a negative eigenvalue {lowest:.6g}")
        smallest = float(np.min(self.symplectic_eigenvalues()))
        if smallest < 1.0 - PHYSICAL_TOLERANCE:
            raise UnphysicalState(f"Smallest symplectic eigenvalue {smallest:.12g} is below 1")
        return self

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.sigma)


@dataclass(frozen=True)
class CovarianceSingleMode:
    """Thermal single-mode state with occupation n; sigma = (2n + 1) 1_2."""

    n: float

    def __post_init__(self) -> None:
        if self.n < -PHYSICAL_TOLERANCE:
            raise UnphysicalState(f"Thermal occupation must be non-negative, got {self.n}")

    @property
    def sigma(self) -> np.ndarray:
        return (2.0 * self.n + 1.0) * np.eye(2, dtype=complex)


def covariance_from_moments(m: Moments, validate: bool = True) -> CovarianceTwoMode:
    """Covariance of the signal-idler state with moments (N_S, N_I, M)."""
    a, b, c = 2.0 * m.n_s + 1.0, 2.0 * m.n_i + 1.0, 2.0 * m.m
    sigma = np.array(
        [
            [a, 0, 0, c],
            [0, b, c, 0],
            [0, c.conjugate(), a, 0],
            [c.conjugate(), 0, 0, b],
        ],
        dtype=complex,
    )
    cov = CovarianceTwoMode(sigma)
    return cov.validate() if validate else cov


def covariance_ic(ic: ICMoments, validate: bool = True) -> CovarianceTwoMode:
    """Covariance of the signal-ancilla state left after tracing out the idler (no M-type terms)."""
    a, b, c = 2.0 * ic.n_s + 1.0, 2.0 * ic.n_a + 1.0, 2.0 * ic.n_sa
    sigma = np.array(
        [
            [a, c.conjugate(), 0, 0],
            [c, b, 0, 0],
            [0, 0, a, c],
            [0, 0, c.conjugate(), b],
        ],
        dtype=complex,
    )
    cov = CovarianceTwoMode(sigma)
    return cov.validate() if validate else cov


def _trace_square(x: np.ndarray) -> float:
    return float(np.trace(x @ x).real)


def two_mode_formula(
    sigma: np.ndarray, dsigma: np.ndarray, lambdas: np.ndarray, dlambdas: np.ndarray
) -> float:
    """
    Two-mode Gaussian QFI from sigma, its derivative and the symplectic eigenvalues with their derivatives.

    H = [|G| tr((G^-1 G')^2) + sqrt|1 + G^2| tr(((1 + G^2)^-1 G')^2)
         + 4 (l1^2 - l2^2)(-l1'^2/(l1^4 - 1) + l2'^2/(l2^4 - 1))] / (2(|G| - 1)),  G = K sigma.

    A Delta-lambda term is dropped when its eigenvalue is within 1e-7 of one.
    """
    lambda_1, lambda_2 = float(lambdas[0]), float(lambdas[1])
    if abs(lambda_1 - 1.0) < PURE_TOLERANCE and abs(lambda_2 - 1.0) < PURE_TOLERANCE:
        raise PureStateSingularity("Every symplectic eigenvalue equals one; the state is pure")

    gamma = SYMPLECTIC_FORM @ sigma
    dgamma = SYMPLECTIC_FORM @ dsigma
    shifted = np.eye(4) + gamma @ gamma
    condition = np.linalg.cond(shifted)
    if condition > CONDITION_LIMIT:
        raise IllConditioned(f"cond(1 + Gamma^2) = {condition:.3e} exceeds {CONDITION_LIMIT:.0e}")

    det_gamma = float(np.linalg.det(gamma).real)
    det_shifted = float(np.abs(np.linalg.det(shifted)))
    first = det_gamma * _trace_square(np.linalg.solve(gamma, dgamma))
    second = math.sqrt(det_shifted) * _trace_square(np.linalg.solve(shifted, dgamma))

    spectral = 0.0
    if abs(lambda_1 - 1.0) >= PURE_TOLERANCE:
        spectral -= float(dlambdas[0]) ** 2 / (lambda_1**4 - 1.0)
    if abs(lambda_2 - 1.0) >= PURE_TOLERANCE:
        spectral += float(dlambdas[1]) ** 2 / (lambda_2**4 - 1.0)
    third = 4.0 * (lambda_1**2 - lambda_2**2) * spectral

    return (first + second + third) / (2.0 * (det_gamma - 1.0))


def qfi_two_mode(
    sigma_of: Callable[[float], CovarianceTwoMode],
    epsilon: float,
    fd_step: Optional[float] = None,
    estimand: Estimand = Estimand.KAPPA_I,
    access: Access = Access.ALL_MODES,
) -> QfiResult:
    """
    Numeric two-mode QFI of a parametrized covariance at epsilon.

    Derivatives of sigma and of the descending symplectic eigenvalues are Richardson-refined central
    differences with step fd_step (default max(1e-6 |epsilon|, 1e-12)); eigenvalues are paired by rank.

    Raises:
        PureStateSingularity: If the state at epsilon is pure
        IllConditioned: If 1 + Gamma^2 cannot be inverted reliably
    """
    step = fd_step if fd_step is not None else default_step(epsilon)
    centre = sigma_of(epsilon)
    dsigma = central_difference(lambda x: sigma_of(x).sigma, epsilon, step)
    dlambdas = central_difference(lambda x: sigma_of(x).symplectic_eigenvalues(), epsilon, step)
    value = two_mode_formula(centre.sigma, dsigma, centre.symplectic_eigenvalues(), dlambdas)
    logger.debug(f"Two-mode QFI {value:.6e} at epsilon={epsilon:.6e} (step {step:.3e})")
    return QfiResult(value=max(value, 0.0), estimand=estimand, access=access, method=Method.NUMERIC)


def qfi_vectorized(sigma: np.ndarray, dsigma: np.ndarray) -> float:
    """
    Multimode QFI 1/2 vec(sigma')^dag (conj(sigma) (x) sigma - K (x) K)^-1 vec(sigma').

    Valid when every symplectic eigenvalue exceeds one.
    """
    n = sigma.shape[0] // 2
    form = np.diag(np.concatenate([np.ones(n), -np.ones(n)])).astype(complex)
    operator = np.kron(sigma.conj(), sigma) - np.kron(form, form)
    vec = dsigma.reshape(-1, order="F")
    try:
        solved = np.linalg.solve(operator, vec)
    except np.linalg.LinAlgError as e:
        raise IllConditioned("Vectorized QFI operator is singular", original_exception=e)
    return float(0.5 * (vec.conj() @ solved).real)


def qfi_single_mode(
    n_of: Callable[[float], float],
    epsilon: float,
    fd_step: Optional[float] = None,
    estimand: Estimand = Estimand.KAPPA_I,
) -> QfiResult:
    """
    QFI of a single-mode thermal state, N'^2 / (N (N + 1)).

    Raises:
        DivergentQfi: If N vanishes at epsilon
    """
    step = fd_step if fd_step is not None else default_step(epsilon)
    n = float(n_of(epsilon))
    dn = float(central_difference(lambda x: np.asarray(n_of(x)), epsilon, step))
    if n < OCCUPATION_FLOOR:
        raise DivergentQfi(f"Single-mode occupation {n:.3e} vanishes at epsilon={epsilon:.6e}")
    value = dn**2 / intensity_variance(n)
    return QfiResult(value=value, estimand=estimand, access=Access.SINGLE_MODE, method=Method.NUMERIC)


def qfi_single_mode_purity(sigma: np.ndarray, dsigma: np.ndarray) -> float:
    """
    General single-mode Gaussian QFI in purity form.

    H = tr((sigma^-1 sigma')^2) / (2 (1 + P^2)) + 2 P'^2 / (1 - P^4),  P = |sigma|^(-1/2).
    """
    det = float(np.linalg.det(sigma).real)
    purity = det**-0.5
    ratio = np.linalg.solve(sigma, dsigma)
    dpurity = -0.5 * purity * float(np.trace(ratio).real)
    if abs(1.0 - purity**4) < PHYSICAL_TOLERANCE:
        raise PureStateSingularity("Single-mode state is pure")
    return _trace_square(ratio) / (2.0 * (1.0 + purity**2)) + 2.0 * dpurity**2 / (1.0 - purity**4)


def intensity_error(n: float, dn: float) -> float:
    """Error propagation for a photon-number measurement: Delta^2 eps = N (N + 1) / N'^2."""
    if abs(dn) < DERIVATIVE_FLOOR:
        raise VanishingDerivative(f"dN/d epsilon = {dn:.3e} vanishes")
    return intensity_variance(n) / dn**2


@dataclass(frozen=True)
class MomentsDerivative:
    """Parameter derivative of (N_S, N_I, M)."""

    dn_s: float
    dn_i: float
    dm: complex = 0j


def moments_derivative(func: Callable[[float], Moments], x: float, step: Optional[float] = None) -> MomentsDerivative:
    """Richardson-refined central difference of a Moments-valued map."""
    step = step if step is not None else default_step(x)
    d = central_difference(lambda y: func(y).as_array(), x, step)
    return MomentsDerivative(dn_s=float(d[0].real), dn_i=float(d[1].real), dm=complex(d[2]))


def intensity_diff_error(m: Moments, dm_dkappa: MomentsDerivative) -> float:
    """
    Error in the decay rate from an intensity-difference measurement.

    Delta^2 kappa = [N_S (N_S + 1) + N_I (N_I + 1) - 2|M|^2] / (d(N_S - N_I)/d kappa)^2

    Raises:
        VanishingDerivative: If |d(N_S - N_I)/d kappa| < 1e-30
    """
    slope = dm_dkappa.dn_s - dm_dkappa.dn_i
    if abs(slope) < DERIVATIVE_FLOOR:
        raise VanishingDerivative(f"d(N_S - N_I)/d kappa = {slope:.3e} vanishes")
    return max(difference_variance(m), 0.0) / slope**2


def reparametrize(q: QfiResult, eta: float, length: float) -> QfiResult:
    """Convert between estimands with H_kappa = H_eta L^2 eta^2."""
    if not 0.0 < eta <= 1.0 or not length > 0:
        raise ParameterError(f"Need eta in (0, 1] and length > 0, got eta={eta}, length={length}")
    factor = length**2 * eta**2
    if q.estimand == Estimand.ETA_I:
        return replace(q, value=q.value * factor, estimand=Estimand.KAPPA_I)
    return replace(q, value=q.value / factor, estimand=Estimand.ETA_I)


def su11_full_access_qfi_eta(n_vac: float, eta: float) -> float:
    """N^V / (eta (1 - eta)), the full-access QFI for the idler transmission."""
    if not 0.0 < eta < 1.0:
        raise DivergentQfi(f"Full-access QFI diverges at eta={eta}")
    return n_vac / (eta * (1.0 - eta))


def su11_full_access_qfi_kappa(n_vac: float, kappa: float, length: float) -> float:
    """L^2 N^V / (e^{kappa L} - 1), the full-access QFI for the idler decay rate."""
    if kappa <= 0:
        raise DivergentQfi(f"Full-access QFI diverges at kappa={kappa}")
    return length**2 * n_vac / math.expm1(kappa * length)


def ic_two_mode_qfi(n_vac: float, kappa: float, length: float) -> float:
    """QFI for the decay rate from the signal-ancilla state of the IC setup, N^V the single-pass occupation."""
    if kappa <= 0:
        raise DivergentQfi(f"Two-mode IC QFI diverges at kappa={kappa}")
    eta = math.exp(-kappa * length)
    lost = -math.expm1(-kappa * length)
    return length**2 * n_vac * eta * (1.0 + n_vac * lost) / (lost * (2.0 + n_vac * (2.0 - eta)))


def inverse_ratio(n_diff: float, qfi: float) -> float:
    """(N_S - N_I) / H, the quantity fitted by alpha kappa^2."""
    if qfi <= 0:
        raise ParameterError(f"QFI must be positive, got {qfi}")
    return n_diff / qfi


def approximate_dl_qfi(n_diff: float, kappa: float, alpha: float = APPROXIMATE_DL_ALPHA) -> float:
    """H ~ (N_S - N_I) / (alpha kappa^2) for the distributed-loss medium."""
    if kappa <= 0:
        raise DivergentQfi(f"Approximate DL QFI diverges at kappa={kappa}")
    return n_diff / (alpha * kappa**2)


def _quadratic(x: np.ndarray, alpha: float) -> np.ndarray:
    return alpha * x


def fit_alpha(kappas: Sequence[float], gains: Sequence[float], ratios: Sequence[float]) -> FitReport:
    """
    Joint least-squares fit of ratios = alpha kappa^2 across gains.

    R^2 = 1 - SS_res / SS_tot is computed per gain with the joint alpha and averaged.

    Raises:
        ParameterError: If fewer than three distinct gains or points are supplied
    """
    kappas_arr = np.asarray(kappas, dtype=float)
    gains_arr = np.asarray(gains, dtype=float)
    ratios_arr = np.asarray(ratios, dtype=float)
    distinct = np.unique(gains_arr)
    if len(distinct) < 3 or len(kappas_arr) < 3:
        raise ParameterError(f"Fit needs at least 3 gain levels, got {len(distinct)}")

    x = kappas_arr**2
    # the model is linear through the origin, so x and y share one scale factor
    scale = float(np.max(x))
    popt, _ = curve_fit(_quadratic, x / scale, ratios_arr / scale, p0=[1.0])
    alpha = float(popt[0])
    residuals = ratios_arr - _quadratic(x, alpha)

    per_gain = []
    for gain in distinct:
        mask = gains_arr == gain
        ss_res = float(np.sum(residuals[mask] ** 2))
        ss_tot = float(np.sum((ratios_arr[mask] - np.mean(ratios_arr[mask])) ** 2))
        per_gain.append(1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0)

    report = FitReport(
        alpha=alpha,
        r_squared=float(np.mean(per_gain)),
        residuals=residuals.tolist(),
        r_squared_per_gain=per_gain,
    )
    logger.info(f"Fitted alpha={report.alpha:.4f}, mean R^2={report.r_squared:.4f} over {len(distinct)} gains")
    return report
