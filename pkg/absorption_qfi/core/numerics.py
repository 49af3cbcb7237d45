"""
Shared numerical helpers for absorption-qfi.
This module provides Richardson-refined central differences and Gauss-Legendre quadrature
with node doubling, used by the distributed-loss model and every numeric QFI evaluation.
"""

import logging
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np

from absorption_qfi.error_handling.exceptions import QuadratureNotConverged

logger = logging.getLogger(__name__)

DEFAULT_REL_STEP = 1e-6
DEFAULT_ABS_STEP = 1e-12


def default_step(x: float, rel_step: float = DEFAULT_REL_STEP, abs_step: float = DEFAULT_ABS_STEP) -> float:
    """Finite-difference step max(rel_step*|x|, abs_step)."""
    return max(rel_step * abs(x), abs_step)


def central_difference(func: Callable[[float], np.ndarray], x: float, step: float) -> np.ndarray:
    """
    Derivative of an array-valued function by central differences with one Richardson step.

    The estimates at h and h/2 are combined as (4 D(h/2) - D(h)) / 3, cancelling the h^2 term.

    Args:
        func: Map from a real parameter to a numpy array (any shape, real or complex)
        x: Evaluation point
        step: Base step h > 0

    Returns:
        np.ndarray: Derivative with the shape of func(x)
    """
    if step <= 0:
        raise ValueError(f"Finite-difference step must be positive, got {step}")

    def estimate(h: float) -> np.ndarray:
        return (np.asarray(func(x + h)) - np.asarray(func(x - h))) / (2.0 * h)

    coarse = estimate(step)
    fine = estimate(0.5 * step)
    return (4.0 * fine - coarse) / 3.0


@lru_cache(maxsize=32)
def _legendre_rule(n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n_points)


def gauss_legendre(func: Callable[[np.ndarray], np.ndarray], a: float, b: float, n_points: int) -> np.ndarray:
    """
    Fixed-order Gauss-Legendre rule on [a, b].

    func receives the array of nodes and returns values whose LAST axis runs over the nodes,
    so several integrands can be integrated in one call.
    """
    nodes, weights = _legendre_rule(n_points)
    half = 0.5 * (b - a)
    z = half * nodes + 0.5 * (b + a)
    values = np.asarray(func(z))
    return half * np.tensordot(values, weights, axes=([-1], [0]))


def integrate_doubling(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    n_start: int = 32,
    rtol: float = 1e-10,
    max_doublings: int = 6,
) -> Tuple[np.ndarray, int]:
    """
    Gauss-Legendre integration, doubling the node count until successive estimates agree.

    Returns:
        Tuple of the converged estimate and the node count that produced it

    Raises:
        QuadratureNotConverged: If max_doublings doublings do not reach rtol
    """
    n_points = n_start
    previous = gauss_legendre(func, a, b, n_points)
    for _ in range(max_doublings):
        n_points *= 2
        current = gauss_legendre(func, a, b, n_points)
        if np.all(np.abs(current - previous) <= rtol * np.abs(current)):
            logger.debug(f"Quadrature converged with {n_points} nodes")
            return current, n_points
        previous = current
    raise QuadratureNotConverged(
        f"Gauss-Legendre estimates on [{a}, {b}] still differ beyond rtol={rtol} after {max_doublings} doublings"
    )
