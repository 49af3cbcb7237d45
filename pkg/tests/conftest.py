"""Test-wide setup: sweeps look up an in-process cache manager; give each test a fresh one."""

import cmath

import pytest

from absorption_qfi.core.spectral import PhaseMatching
from absorption_qfi.performance.caching import initialize_cache_manager, reset_cache_manager

_MIN_CACHE_CONFIG = {"cache_type": "lru", "cache_max_size": 16}

LENGTH = 4e7


@pytest.fixture(autouse=True)
def _sweep_cache_manager_per_test():
    reset_cache_manager()
    initialize_cache_manager(_MIN_CACHE_CONFIG)
    yield
    reset_cache_manager()


@pytest.fixture
def length():
    return LENGTH


@pytest.fixture
def mismatched():
    """Factory of a phase mismatch with Sigma_K L = 1.3 and Delta_K L = -0.7."""

    def build(gamma_abs: float) -> PhaseMatching:
        sigma, delta = 1.3 / LENGTH, -0.7 / LENGTH
        return PhaseMatching(
            delta_k=delta, sigma_k=sigma, nu=cmath.sqrt(sigma**2 - 4.0 * gamma_abs**2), gamma_abs=gamma_abs
        )

    return build
