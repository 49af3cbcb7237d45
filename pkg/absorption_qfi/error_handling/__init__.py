"""
Error handling package for absorption-qfi.
"""

from absorption_qfi.error_handling.exceptions import (
    AbsorptionQfiError,
    ConfigurationError,
    DivergentQfi,
    IllConditioned,
    NoCrossover,
    NoPhaseMatchedPoint,
    NumericalError,
    ParameterError,
    PureStateSingularity,
    QuadratureNotConverged,
    UnphysicalState,
    VanishingDerivative,
)

__all__ = [
    "AbsorptionQfiError",
    "ConfigurationError",
    "DivergentQfi",
    "IllConditioned",
    "NoCrossover",
    "NoPhaseMatchedPoint",
    "NumericalError",
    "ParameterError",
    "PureStateSingularity",
    "QuadratureNotConverged",
    "UnphysicalState",
    "VanishingDerivative",
]
