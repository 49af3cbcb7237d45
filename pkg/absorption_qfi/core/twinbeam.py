"""
Lossless continuous-wave twin-beam propagation for absorption-qfi.
This module provides the 2x2 propagator of the coupled (a_S, a_I^dagger) equations of motion and the
second-order moment algebra (vacuum, seeded and beamsplitter updates) shared by every configuration.

Moments are per-mode occupation numbers; the grid rescaling a = c*sqrt(delta_omega) never enters.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.linalg import expm

from absorption_qfi.core.spectral import PhaseMatching
from absorption_qfi.error_handling.exceptions import ParameterError

logger = logging.getLogger(__name__)

SERIES_THRESHOLD = 1e-4
NEGATIVE_TOLERANCE = 1e-9

ArrayLike = Union[float, np.ndarray]


def half_angle_terms(nu_squared: complex, z: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Return (sin(nu z/2)/nu, cos(nu z/2)) as functions of nu^2 only.

    Both terms are even in nu, so the square-root branch never matters. Below |nu z| < 1e-4 a
    fourth-order series replaces the quotient. nu_squared may be complex (distributed loss).
    """
    z = np.asarray(z, dtype=float)
    nu_squared = complex(nu_squared)
    nu = np.sqrt(nu_squared)
    x2 = np.asarray(nu_squared * z**2 / 4.0, dtype=complex)

    series_s = 0.5 * z * (1.0 - x2 / 6.0 + x2**2 / 120.0)
    series_c = 1.0 - x2 / 2.0 + x2**2 / 24.0

    small = np.abs(nu * z) < SERIES_THRESHOLD
    if np.all(small):
        return np.asarray(series_s, dtype=complex), np.asarray(series_c, dtype=complex)

    safe_nu = nu if nu != 0 else 1.0
    exact_s = np.sin(nu * z / 2.0) / safe_nu
    exact_c = np.cos(nu * z / 2.0)
    return np.where(small, series_s, exact_s), np.where(small, series_c, exact_c)


@dataclass(frozen=True)
class Propagator:
    """Block elements of U(omega; L) acting on (a_S(omega), a_I^dagger(-omega))."""

    u_ss: complex
    u_ii: complex
    u_si: complex
    u_is: complex

    @classmethod
    def identity(cls) -> "Propagator":
        return cls(u_ss=1.0 + 0j, u_ii=1.0 + 0j, u_si=0j, u_is=0j)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Propagator":
        return cls(
            u_ss=complex(matrix[0, 0]),
            u_ii=complex(matrix[1, 1]),
            u_si=complex(matrix[0, 1]),
            u_is=complex(matrix[1, 0]),
        )

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.u_ss, self.u_si], [self.u_is, self.u_ii]], dtype=complex)

    def compose(self, other: "Propagator") -> "Propagator":
        """Propagator for `other` followed by `self` (matrix product self @ other)."""
        return Propagator.from_matrix(self.as_matrix() @ other.as_matrix())

    def bogoliubov_defect(self) -> float:
        """|u_ss|^2 - |u_si|^2 - 1, zero for a lossless propagator."""
        return abs(self.u_ss) ** 2 - abs(self.u_si) ** 2 - 1.0


def propagator(pm: PhaseMatching, gamma: complex, length: float) -> Propagator:
    """
    Closed-form propagator through a lossless nonlinear region.

    Args:
        pm: Phase-matching quantities at the detuning of interest
        gamma: Complex coupling |gamma| e^{i Phi_P} (nm^-1); |gamma| should equal pm.gamma_abs
        length: Region length L (nm)

    Returns:
        Propagator: u_ss, u_ii = e^{i dK L/2}[c +/- i Sigma s], u_si = 2i gamma e^{i dK L/2} s,
        u_is = -2i gamma* e^{i dK L/2} s with s = sin(nu L/2)/nu, c = cos(nu L/2)
    """
    if not length > 0:
        raise ParameterError(f"length must be positive, got {length}")
    gamma = complex(gamma)
    nu_squared = pm.sigma_k**2 - 4.0 * abs(gamma) ** 2
    s, c = half_angle_terms(nu_squared, length)
    s, c = complex(s), complex(c)
    phase = np.exp(0.5j * pm.delta_k * length)
    return Propagator(
        u_ss=complex(phase * (c + 1j * pm.sigma_k * s)),
        u_ii=complex(phase * (c - 1j * pm.sigma_k * s)),
        u_si=complex(2j * gamma * phase * s),
        u_is=complex(-2j * gamma.conjugate() * phase * s),
    )


def coupling_matrix(pm: PhaseMatching, gamma: complex) -> np.ndarray:
    """Q in d/dz (a_S, a_I^dagger) = iQ (a_S, a_I^dagger)."""
    gamma = complex(gamma)
    dk_s = 0.5 * (pm.sigma_k + pm.delta_k)
    dk_i = 0.5 * (pm.sigma_k - pm.delta_k)
    return np.array([[dk_s, gamma], [-gamma.conjugate(), -dk_i]], dtype=complex)


def propagator_expm(pm: PhaseMatching, gamma: complex, length: float) -> Propagator:
    """Propagator from the matrix exponential expm(iQL); an independent check of `propagator`."""
    if not length > 0:
        raise ParameterError(f"length must be positive, got {length}")
    return Propagator.from_matrix(expm(1j * coupling_matrix(pm, gamma) * length))


@dataclass(frozen=True)
class Moments:
    """Second-order moments N_S = <a_S^dag a_S>, N_I = <a_I^dag a_I>, M = <a_S a_I>."""

    n_s: float
    n_i: float
    m: complex = 0j

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_s", float(self.n_s))
        object.__setattr__(self, "n_i", float(self.n_i))
        object.__setattr__(self, "m", complex(self.m))
        if self.n_s < -NEGATIVE_TOLERANCE or self.n_i < -NEGATIVE_TOLERANCE:
            raise ParameterError(f"Occupations must be non-negative, got n_s={self.n_s}, n_i={self.n_i}")

    @classmethod
    def vacuum(cls) -> "Moments":
        return cls(0.0, 0.0, 0j)

    def as_array(self) -> np.ndarray:
        return np.array([self.n_s, self.n_i, self.m], dtype=complex)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "Moments":
        return cls(float(values[0].real), float(values[1].real), complex(values[2]))


@dataclass(frozen=True)
class LossChannel:
    """Beamsplitter loss plus added phase on each arm."""

    eta_s: float = 1.0
    eta_i: float = 1.0
    phi_s: float = 0.0
    phi_i: float = 0.0

    def __post_init__(self) -> None:
        for name in ("eta_s", "eta_i"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")

    @property
    def added_phase(self) -> float:
        return self.phi_s + self.phi_i

    def then(self, other: "LossChannel") -> "LossChannel":
        """The channel equivalent to applying self and then other."""
        return LossChannel(
            eta_s=self.eta_s * other.eta_s,
            eta_i=self.eta_i * other.eta_i,
            phi_s=self.phi_s + other.phi_s,
            phi_i=self.phi_i + other.phi_i,
        )


def vacuum_moments(p: Propagator) -> Moments:
    """Moments after a vacuum-seeded pass: N_S = N_I = |u_si|^2, M = u_ss u_is*."""
    n = abs(p.u_si) ** 2
    return Moments(n_s=n, n_i=n, m=p.u_ss * p.u_is.conjugate())


def seeded_moments(p: Propagator, moments_in: Moments, gamma: complex) -> Moments:
    """
    Moments after a pass seeded with arbitrary (zero-mean, phase-insensitive per mode) input.

    N_S' = N_S (1 + N^V) + N^V (1 + N_I) - 2 Re[(g*/g) M^V M]
    N_I' = N_I (1 + N^V) + N^V (1 + N_S) - 2 Re[(g*/g) M^V M]
    M'   = M^V (1 + N_S) + M^V N_I - (g/g*) N^V M* - (g*/g) (M^V)^2 / N^V M

    With N^V = 0 the last coefficient is taken as u_ss u_ii*, its value in the limit, so the
    identity propagator passes the input through unchanged.
    """
    vac = vacuum_moments(p)
    gamma = complex(gamma)
    ratio = gamma.conjugate() / gamma if gamma != 0 else 1.0 + 0j
    n_v, m_v = vac.n_s, vac.m

    cross = 2.0 * (ratio * m_v * moments_in.m).real
    if n_v > 0:
        direct = -ratio * m_v**2 / n_v
    else:
        direct = p.u_ss * p.u_ii.conjugate()

    return Moments(
        n_s=moments_in.n_s * (1.0 + n_v) + n_v * (1.0 + moments_in.n_i) - cross,
        n_i=moments_in.n_i * (1.0 + n_v) + n_v * (1.0 + moments_in.n_s) - cross,
        m=m_v * (1.0 + moments_in.n_s)
        + m_v * moments_in.n_i
        - ratio.conjugate() * n_v * moments_in.m.conjugate()
        + direct * moments_in.m,
    )


def apply_loss(moments_in: Moments, ch: LossChannel) -> Moments:
    """Beamsplitter update: N -> eta N, M -> sqrt(eta_S eta_I) e^{i(Phi_S + Phi_I)} M."""
    return Moments(
        n_s=ch.eta_s * moments_in.n_s,
        n_i=ch.eta_i * moments_in.n_i,
        m=np.sqrt(ch.eta_s * ch.eta_i) * np.exp(1j * ch.added_phase) * moments_in.m,
    )


def intensity_variance(n: float) -> float:
    """Photon-number variance of a thermal mode, N(N + 1)."""
    return n * (n + 1.0)


def difference_variance(moments: Moments) -> float:
    """Variance of N_S - N_I for a zero-mean two-mode Gaussian state."""
    return intensity_variance(moments.n_s) + intensity_variance(moments.n_i) - 2.0 * abs(moments.m) ** 2
