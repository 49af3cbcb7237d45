"""
Custom exceptions for absorption-qfi.
This module provides the coded exception hierarchy shared by the numerical core and the CLI.
"""

import math
from typing import Optional


class AbsorptionQfiError(Exception):
    """Base exception class for absorption-qfi errors."""

    exit_code = 1

    def __init__(self, message: str, code: int = -32000, original_exception: Optional[Exception] = None):
        self.message = message
        self.code = code
        self.original_exception = original_exception
        super().__init__(self.message)

    def to_dict(self) -> dict:
        """Convert exception to a serializable error object."""
        error_data = {"exception": self.__class__.__name__, "args": self.args}
        if self.original_exception:
            error_data["original_exception"] = str(self.original_exception)
        return {"code": self.code, "message": self.message, "data": error_data}


class ConfigurationError(AbsorptionQfiError):
    """Configuration error."""

    exit_code = 2

    def __init__(
        self,
        message: str = "Configuration error occurred",
        original_exception: Optional[Exception] = None,
    ):
        super().__init__(message, code=-32004, original_exception=original_exception)


class ParameterError(AbsorptionQfiError):
    """Invalid argument passed to a numerical operation."""

    exit_code = 2

    def __init__(self, message: str = "Invalid parameter", original_exception: Optional[Exception] = None):
        super().__init__(message, code=-32007, original_exception=original_exception)


class NumericalError(AbsorptionQfiError):
    """Numerical evaluation failed to converge or produced an unusable result."""

    exit_code = 3

    def __init__(
        self,
        message: str = "Numerical evaluation failed",
        code: int = -32020,
        original_exception: Optional[Exception] = None,
    ):
        super().__init__(message, code=code, original_exception=original_exception)


class NoPhaseMatchedPoint(NumericalError):
    """Sigma_K keeps a constant nonzero sign over the search interval."""

    def __init__(self, message: str = "No phase-matched frequency found", original_exception: Optional[Exception] = None):
        super().__init__(message, code=-32021, original_exception=original_exception)


class QuadratureNotConverged(NumericalError):
    """Gauss-Legendre doubling did not reach the requested tolerance."""

    def __init__(self, message: str = "Quadrature did not converge", original_exception: Optional[Exception] = None):
        super().__init__(message, code=-32022, original_exception=original_exception)


class IllConditioned(NumericalError):
    """Matrix inversion inside the QFI formula is numerically unreliable."""

    def __init__(self, message: str = "Ill-conditioned matrix", original_exception: Optional[Exception] = None):
        super().__init__(message, code=-32023, original_exception=original_exception)


class UnphysicalState(NumericalError):
    """Covariance matrix violates the uncertainty principle."""

    def __init__(self, message: str = "Unphysical covariance matrix", original_exception: Optional[Exception] = None):
        super().__init__(message, code=-32024, original_exception=original_exception)


class DivergentQfi(NumericalError):
    """The quantum Fisher information diverges at the requested point."""

    def __init__(self, message: str = "QFI diverges", original_exception: Optional[Exception] = None):
        super().__init__(message, code=-32025, original_exception=original_exception)
        self.value = math.inf


class PureStateSingularity(DivergentQfi):
    """Every symplectic eigenvalue equals one, so the two-mode formula is singular."""

    def __init__(self, message: str = "Pure-state singularity", original_exception: Optional[Exception] = None):
        super().__init__(message, original_exception=original_exception)
        self.code = -32026


class VanishingDerivative(NumericalError):
    """The measured signal does not depend on the parameter at this point."""

    def __init__(self, message: str = "Derivative vanishes", original_exception: Optional[Exception] = None):
        super().__init__(message, code=-32027, original_exception=original_exception)
        self.value = math.inf


class NoCrossover(NumericalError):
    """Two curves never cross on the sampled grid."""

    def __init__(self, message: str = "No crossover on grid", original_exception: Optional[Exception] = None):
        super().__init__(message, code=-32028, original_exception=original_exception)
