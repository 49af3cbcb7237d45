"""
Spectral quantities for absorption-qfi.
This module provides frequency grids, Taylor-series dispersion profiles and the phase-matching
quantities (Delta_K, Sigma_K, nu) that feed every propagator.

Units: detunings in rad/s, wavevectors in nm^-1.
"""

import cmath
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as poly
from scipy.optimize import root_scalar

from absorption_qfi.error_handling.exceptions import NoPhaseMatchedPoint, ParameterError

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-3  # rad/s
SIGMA_TOLERANCE = 1e-15  # nm^-1
MAX_ITERATIONS = 400


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform detuning grid omega_n = omega0 + n * delta_omega."""

    omega0: float
    delta_omega: float
    n_points: int

    def __post_init__(self) -> None:
        if not self.delta_omega > 0:
            raise ParameterError(f"delta_omega must be positive, got {self.delta_omega}")
        if self.n_points < 1:
            raise ParameterError(f"n_points must be at least 1, got {self.n_points}")

    def point(self, n: int) -> float:
        if not 0 <= n < self.n_points:
            raise ParameterError(f"Grid index {n} outside [0, {self.n_points})")
        return self.omega0 + n * self.delta_omega

    def points(self) -> np.ndarray:
        return self.omega0 + np.arange(self.n_points) * self.delta_omega

    @classmethod
    def symmetric(cls, half_width: float, n_points: int) -> "FrequencyGrid":
        """Grid spanning [-half_width, half_width] with n_points >= 2 samples."""
        if n_points < 2:
            raise ParameterError("A symmetric grid needs at least two points")
        return cls(omega0=-half_width, delta_omega=2.0 * half_width / (n_points - 1), n_points=n_points)


DEFAULT_SEARCH_GRID = FrequencyGrid.symmetric(half_width=1e15, n_points=4001)


@dataclass(frozen=True)
class DispersionProfile:
    """
    Detuned dispersion relations as truncated power series in the detuning.

    taylor_s[k] and taylor_i[k] multiply omega**k (units nm^-1 (rad/s)^-k). The constant terms
    must vanish so that Delta_k(0) = 0. sigma_offset is a residual mismatch at the central
    frequency that shifts Sigma_K only; it defaults to zero (phase-matched by construction).
    """

    taylor_s: Tuple[float, ...] = ()
    taylor_i: Tuple[float, ...] = ()
    sigma_offset: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "taylor_s", tuple(float(c) for c in self.taylor_s))
        object.__setattr__(self, "taylor_i", tuple(float(c) for c in self.taylor_i))
        for name, coeffs in (("taylor_s", self.taylor_s), ("taylor_i", self.taylor_i)):
            if coeffs and coeffs[0] != 0.0:
                raise ParameterError(f"{name} constant term must be zero, got {coeffs[0]}")

    @classmethod
    def zero(cls) -> "DispersionProfile":
        return cls()

    def delta_k_s(self, omega: float) -> float:
        return float(poly.polyval(omega, self.taylor_s)) if self.taylor_s else 0.0

    def delta_k_i(self, omega: float) -> float:
        return float(poly.polyval(omega, self.taylor_i)) if self.taylor_i else 0.0

    def sigma_coefficients(self) -> np.ndarray:
        """Power-series coefficients of Sigma_K(omega) = dk_S(omega) + dk_I(-omega) + offset."""
        size = max(len(self.taylor_s), len(self.taylor_i), 1)
        coeffs = np.zeros(size)
        coeffs[: len(self.taylor_s)] += self.taylor_s
        signs = (-1.0) ** np.arange(len(self.taylor_i))
        coeffs[: len(self.taylor_i)] += signs * np.asarray(self.taylor_i)
        coeffs[0] += self.sigma_offset
        return coeffs

    def sigma_k(self, omega: float) -> float:
        return float(poly.polyval(omega, self.sigma_coefficients()))

    def sigma_k_derivative(self, omega: float) -> float:
        return float(poly.polyval(omega, poly.polyder(self.sigma_coefficients())))


@dataclass(frozen=True)
class PhaseMatching:
    """Phase-matching quantities at one detuning."""

    delta_k: float
    sigma_k: float
    nu: complex
    gamma_abs: float = 0.0

    @property
    def nu_squared(self) -> complex:
        """Sigma_K^2 - 4|gamma|^2 without the square-root round trip."""
        return complex(self.sigma_k**2 - 4.0 * self.gamma_abs**2)

    @classmethod
    def phase_matched(cls, gamma_abs: float) -> "PhaseMatching":
        return evaluate_mismatch(DispersionProfile.zero(), 0.0, gamma_abs)


def evaluate_mismatch(profile: DispersionProfile, omega: float, gamma_abs: float) -> PhaseMatching:
    """
    Evaluate Delta_K, Sigma_K and nu at a detuning.

    The signal branch is evaluated at +omega and the idler branch at -omega.

    Args:
        profile: Dispersion profile
        omega: Detuning from the central frequencies (rad/s)
        gamma_abs: Coupling magnitude |gamma| (nm^-1)

    Returns:
        PhaseMatching: Delta_K = dk_S(w) - dk_I(-w), Sigma_K = dk_S(w) + dk_I(-w) and the principal
        square root nu of Sigma_K^2 - 4|gamma|^2
    """
    if gamma_abs < 0:
        raise ParameterError(f"gamma_abs must be non-negative, got {gamma_abs}")
    dk_s = profile.delta_k_s(omega)
    dk_i = profile.delta_k_i(-omega)
    sigma = dk_s + dk_i + profile.sigma_offset
    nu = cmath.sqrt(complex(sigma**2 - 4.0 * gamma_abs**2))
    return PhaseMatching(delta_k=dk_s - dk_i, sigma_k=sigma, nu=nu, gamma_abs=gamma_abs)


def phase_matched_frequency(profile: DispersionProfile, grid: Optional[FrequencyGrid] = None) -> float:
    """
    Locate the detuning nearest omega = 0 where Sigma_K vanishes.

    Sign changes of Sigma_K on the grid bracket the roots, which are then refined with Brent's method and
    polished with Newton steps until |Sigma_K| < 1e-15 nm^-1.

    Raises:
        NoPhaseMatchedPoint: If Sigma_K keeps a constant nonzero sign on the grid
    """
    coeffs = profile.sigma_coefficients()
    if not np.any(coeffs):
        return 0.0

    grid = grid or DEFAULT_SEARCH_GRID
    omegas = grid.points()
    values = poly.polyval(omegas, coeffs)

    roots = [float(w) for w, v in zip(omegas, values) if v == 0.0]
    brackets = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]
    for index in brackets:
        roots.append(_refine_root(profile, float(omegas[index]), float(omegas[index + 1])))

    if not roots:
        raise NoPhaseMatchedPoint(
            f"Sigma_K keeps a constant sign on [{omegas[0]:.3e}, {omegas[-1]:.3e}] rad/s"
        )
    root = min(roots, key=abs)
    logger.debug(f"Phase-matched detuning {root:.6e} rad/s ({len(roots)} candidate roots)")
    return root


def _refine_root(profile: DispersionProfile, lo: float, hi: float) -> float:
    bracketed = root_scalar(profile.sigma_k, bracket=(lo, hi), method="brentq", xtol=ROOT_XTOL, maxiter=MAX_ITERATIONS)
    if not bracketed.converged:
        raise NoPhaseMatchedPoint(f"Root refinement on [{lo:.3e}, {hi:.3e}] rad/s stopped: {bracketed.flag}")
    root = float(bracketed.root)

    if abs(profile.sigma_k(root)) >= SIGMA_TOLERANCE:
        polished = root_scalar(
            profile.sigma_k,
            x0=root,
            fprime=profile.sigma_k_derivative,
            method="newton",
            rtol=4.0 * np.finfo(float).eps,
            maxiter=MAX_ITERATIONS,
        )
        if polished.converged and lo <= polished.root <= hi:
            root = float(polished.root)

    # Sigma_K cannot resolve below one float step in omega
    residual = abs(profile.sigma_k(root))
    floor = 4.0 * abs(profile.sigma_k_derivative(root)) * float(np.spacing(abs(root)))
    if residual >= max(SIGMA_TOLERANCE, floor):
        raise NoPhaseMatchedPoint(f"Sigma_K = {residual:.3e} nm^-1 at the refined root {root:.6e} rad/s")
    return root


def mismatch_on_grid(profile: DispersionProfile, grid: FrequencyGrid, gamma_abs: float) -> Sequence[PhaseMatching]:
    """evaluate_mismatch at every grid point."""
    return [evaluate_mismatch(profile, float(w), gamma_abs) for w in grid.points()]
