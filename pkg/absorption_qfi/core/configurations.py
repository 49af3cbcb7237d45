"""
Sensing configurations for absorption-qfi.
This module builds the output moments of the SU(1,1) interferometer, the induced-coherence (IC)
setup with its ancilla and balanced beamsplitter, and the distributed-loss (DL) medium, together
with the shared gain and transmission parametrization.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from absorption_qfi.core.numerics import gauss_legendre, integrate_doubling
from absorption_qfi.core.spectral import PhaseMatching
from absorption_qfi.core.twinbeam import (
    LossChannel,
    Moments,
    apply_loss,
    coupling_matrix,
    half_angle_terms,
    propagator,
    seeded_moments,
    vacuum_moments,
)
from absorption_qfi.error_handling.exceptions import NumericalError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_LENGTH_NM = 4e7
MIN_QUADRATURE_POINTS = 32
QUADRATURE_RTOL = 1e-10


def _check_length(length: float) -> None:
    if not length > 0:
        raise ParameterError(f"length must be positive, got {length}")


def eta_from_kappa(kappa: float, length: float) -> float:
    """Transmission eta = exp(-kappa L) of a decay rate kappa (nm^-1) over length L (nm)."""
    _check_length(length)
    if kappa < 0:
        raise ParameterError(f"kappa must be non-negative, got {kappa}")
    return math.exp(-kappa * length)


def kappa_from_eta(eta: float, length: float) -> float:
    """Decay rate -ln(eta)/L of a transmission eta in (0, 1]."""
    _check_length(length)
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must lie in (0, 1], got {eta}")
    return -math.log(eta) / length


@dataclass(frozen=True)
class GainSpec:
    """Parametric gain expressed as the peak single-pass signal occupation N^P_S = sinh^2(|gamma| L)."""

    n_peak: float

    def __post_init__(self) -> None:
        if self.n_peak < 0:
            raise ParameterError(f"n_peak must be non-negative, got {self.n_peak}")

    def gamma_abs(self, length: float) -> float:
        _check_length(length)
        return math.asinh(math.sqrt(self.n_peak)) / length

    @classmethod
    def from_gamma(cls, gamma_abs: float, length: float) -> "GainSpec":
        _check_length(length)
        return cls(n_peak=math.sinh(gamma_abs * length) ** 2)


def su11_moments(
    gain: GainSpec, pm: PhaseMatching, ch: LossChannel, phi_p2: float, length: float = DEFAULT_LENGTH_NM
) -> Moments:
    """
    SU(1,1) output moments by composition: vacuum pass, loss channel, seeded second pass.

    The first pass has pump phase 0; the second pass uses gamma = |gamma| e^{i phi_p2}.
    """
    g = gain.gamma_abs(length)
    first = vacuum_moments(propagator(pm, g, length))
    between = apply_loss(first, ch)
    gamma2 = g * np.exp(1j * phi_p2)
    return seeded_moments(propagator(pm, gamma2, length), between, gamma2)


def su11_closed_form(
    gain: GainSpec, pm: PhaseMatching, ch: LossChannel, phi_p2: float, length: float = DEFAULT_LENGTH_NM
) -> Moments:
    """SU(1,1) output moments from their closed forms in N^V and the real-coupling M^V."""
    vac = vacuum_moments(propagator(pm, gain.gamma_abs(length), length))
    n, m0 = vac.n_s, vac.m
    root = math.sqrt(ch.eta_s * ch.eta_i)
    phi = ch.added_phase
    eta_sum = ch.eta_s + ch.eta_i

    cross = 2.0 * root * (np.exp(1j * (phi - phi_p2)) * m0**2).real
    cubic = m0**3 / n if n > 0 else 0j
    m = (
        np.exp(1j * phi_p2) * m0 * (1.0 + n * eta_sum)
        - root * np.exp(-1j * (phi - 2.0 * phi_p2)) * n * m0.conjugate()
        - root * np.exp(1j * phi) * cubic
    )
    return Moments(
        n_s=n * (1.0 + ch.eta_s) + n**2 * eta_sum - cross,
        n_i=n * (1.0 + ch.eta_i) + n**2 * eta_sum - cross,
        m=m,
    )


def medium_phase(pm: PhaseMatching, length: float, gamma_abs: Optional[float] = None) -> float:
    """Psi = arg(-(M^V)^2), the phase the pair acquires in the medium; zero at phase match."""
    g = pm.gamma_abs if gamma_abs is None else gamma_abs
    m_v = vacuum_moments(propagator(pm, g, length)).m
    if m_v == 0:
        return 0.0
    return float(np.angle(-(m_v**2)))


def anti_squeeze_phase(
    pm: PhaseMatching, ch: LossChannel, length: float = DEFAULT_LENGTH_NM, gamma_abs: Optional[float] = None
) -> float:
    """
    Second-pass pump phase that runs the second squeezer as an anti-squeezer.

    Solves cos(Phi_S + Phi_I - Phi_P + Psi) = -1, i.e. Phi_P = pi + Psi + Phi_S + Phi_I, wrapped to [0, 2 pi).
    """
    psi = medium_phase(pm, length, gamma_abs)
    return float(np.mod(math.pi + psi + ch.added_phase, 2.0 * math.pi))


@dataclass(frozen=True)
class ICMoments:
    """Induced-coherence moments after the second squeezer (signal S, idler I, ancilla A)."""

    n_s: float
    n_i: float
    n_a: float
    n_sa: complex = 0j
    m_si: complex = 0j
    m_ai: complex = 0j


def ic_moments(
    gain: GainSpec, pm: PhaseMatching, ch: LossChannel, phi_p2: float, length: float = DEFAULT_LENGTH_NM
) -> ICMoments:
    """
    IC moments: the lossy idler and a vacuum ancilla seed the second squeezer, the signal bypasses it.

    N_SA = <a_S^dag a_A> = sqrt(eta_S eta_I) e^{-i(Phi_S + Phi_I - Phi_P)} N^V U^{II}
    """
    g = gain.gamma_abs(length)
    p = propagator(pm, g, length)
    vac = vacuum_moments(p)
    n, m0 = vac.n_s, vac.m
    root = math.sqrt(ch.eta_s * ch.eta_i)
    phi = ch.added_phase

    return ICMoments(
        n_s=ch.eta_s * n,
        n_i=n + ch.eta_i * n * (1.0 + n),
        n_a=n * (1.0 + ch.eta_i * n),
        n_sa=complex(root * np.exp(-1j * (phi - phi_p2)) * n * p.u_ii),
        m_si=complex(root * np.exp(1j * phi) * m0 * p.u_ii.conjugate()),
        m_ai=complex(np.exp(1j * phi_p2) * m0 * (1.0 + ch.eta_i * n)),
    )


def ic_balanced_bs(ic: ICMoments, sign: int) -> float:
    """Intensity in the +/- output arm of the balanced beamsplitter: (N_S + N_A +/- 2 Im N_SA) / 2."""
    if sign not in (1, -1):
        raise ParameterError(f"sign must be +1 or -1, got {sign}")
    return 0.5 * (ic.n_s + ic.n_a + sign * 2.0 * ic.n_sa.imag)


def ic_optimal_phase(
    pm: PhaseMatching, ch: LossChannel, length: float = DEFAULT_LENGTH_NM, gamma_abs: Optional[float] = None
) -> float:
    """Pump phase maximizing Im N_SA, which makes the "-" arm the dark arm; pi/2 at phase match."""
    g = pm.gamma_abs if gamma_abs is None else gamma_abs
    u_ii = propagator(pm, g, length).u_ii
    return float(np.mod(0.5 * math.pi + ch.added_phase - np.angle(u_ii), 2.0 * math.pi))


@dataclass(frozen=True)
class DLParams:
    """Distributed-loss medium: decay rates (nm^-1), length (nm) and the starting quadrature order."""

    kappa_s: float = 0.0
    kappa_i: float = 0.0
    length: float = DEFAULT_LENGTH_NM
    quadrature_points: int = MIN_QUADRATURE_POINTS

    def __post_init__(self) -> None:
        if self.kappa_s < 0 or self.kappa_i < 0:
            raise ParameterError(f"Decay rates must be non-negative, got {self.kappa_s}, {self.kappa_i}")
        _check_length(self.length)
        if self.quadrature_points < MIN_QUADRATURE_POINTS:
            raise ParameterError(
                f"quadrature_points must be at least {MIN_QUADRATURE_POINTS}, got {self.quadrature_points}"
            )


def dl_vacuum_moments(gain: GainSpec, pm: PhaseMatching, dl: DLParams, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vacuum-seeded moments N^{DV}(z), M^{DV}(z) of a lossy medium, vectorized over z.

    The loss enters through Sigma~ = Sigma_K + i(kappa_S - kappa_I)/2, nu~^2 = Sigma~^2 - 4|gamma|^2
    and the overall damping exp(-(kappa_S + kappa_I) z / 2).
    """
    g = gain.gamma_abs(dl.length)
    z = np.asarray(z, dtype=float)
    sigma = pm.sigma_k + 0.5j * (dl.kappa_s - dl.kappa_i)
    s, c = half_angle_terms(sigma**2 - 4.0 * g**2, z)
    damping = np.exp(-0.5 * (dl.kappa_s + dl.kappa_i) * z)
    n = damping * np.abs(2.0 * g * s) ** 2
    m = 2j * g * damping * np.conjugate(s) * (c + 1j * sigma * s)
    return n, m


def _dl_integrands(gain: GainSpec, pm: PhaseMatching, dl: DLParams):
    def integrand(z: np.ndarray) -> np.ndarray:
        n, m = dl_vacuum_moments(gain, pm, dl, z)
        return np.stack([n.astype(complex), m])

    return integrand


def dl_converged_order(gain: GainSpec, pm: PhaseMatching, dl: DLParams) -> int:
    """Gauss-Legendre node count at which the DL bath integrals converge."""
    _, order = integrate_doubling(
        _dl_integrands(gain, pm, dl), 0.0, dl.length, n_start=dl.quadrature_points, rtol=QUADRATURE_RTOL
    )
    return order


def dl_moments(
    gain: GainSpec, pm: PhaseMatching, dl: DLParams, quadrature_order: Optional[int] = None
) -> Moments:
    """
    Moments at the end of a lossy nonlinear region.

    N_S = N^{DV}(L) + kappa_I int_0^L N^{DV},  N_I = N^{DV}(L) + kappa_S int_0^L N^{DV},
    M = M^{DV}(L) + kappa_S int_0^L M^{DV}.

    Args:
        gain: Peak gain
        pm: Phase-matching quantities
        dl: Medium parameters
        quadrature_order: Fixed Gauss-Legendre order; None doubles from dl.quadrature_points until
            successive estimates agree to 1e-10 relative

    Raises:
        QuadratureNotConverged: If six doublings do not converge
    """
    integrand = _dl_integrands(gain, pm, dl)
    if quadrature_order is None:
        integrals, _ = integrate_doubling(
            integrand, 0.0, dl.length, n_start=dl.quadrature_points, rtol=QUADRATURE_RTOL
        )
    else:
        integrals = gauss_legendre(integrand, 0.0, dl.length, quadrature_order)

    n_end, m_end = dl_vacuum_moments(gain, pm, dl, np.array([dl.length]))
    n_int, m_int = integrals[0].real, integrals[1]
    return Moments(
        n_s=float(n_end[0]) + dl.kappa_i * n_int,
        n_i=float(n_end[0]) + dl.kappa_s * n_int,
        m=complex(m_end[0]) + dl.kappa_s * m_int,
    )


def dl_langevin_oracle(gain: GainSpec, pm: PhaseMatching, dl: DLParams, rtol: float = 1e-12) -> Moments:
    """
    DL moments by direct integration of the covariance equation dR/dz = A R + R A^dag + D.

    R = <v v^dag> for v = (a_S, a_I^dag), so R = [[1 + N_S, M], [M*, N_I]], with A = i Q~, the decay rates
    folded into the diagonal of Q~, bath diffusion D = diag(kappa_S, 0) and R(0) = diag(1, 0).
    Integrated with DOP853 in the rescaled coordinate t = z / L.
    """
    g = gain.gamma_abs(dl.length)
    q = coupling_matrix(pm, g)
    q[0, 0] += 0.5j * dl.kappa_s
    q[1, 1] += 0.5j * dl.kappa_i
    drift = 1j * q * dl.length
    diffusion = np.diag([dl.kappa_s, 0.0]).astype(complex) * dl.length

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        r = (y[:4] + 1j * y[4:]).reshape(2, 2)
        dr = drift @ r + r @ drift.conj().T + diffusion
        flat = dr.reshape(4)
        return np.concatenate([flat.real, flat.imag])

    r0 = np.diag([1.0, 0.0]).astype(complex).reshape(4)
    solution = solve_ivp(
        rhs,
        (0.0, 1.0),
        np.concatenate([r0.real, r0.imag]),
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-2,
    )
    if not solution.success:
        raise NumericalError(f"Langevin covariance integration failed: {solution.message}")

    y = solution.y[:, -1]
    r = (y[:4] + 1j * y[4:]).reshape(2, 2)
    return Moments(n_s=r[0, 0].real - 1.0, n_i=r[1, 1].real, m=r[0, 1])
