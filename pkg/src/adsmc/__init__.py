"""Adaptive discrete sliding-mode control under sampling and quantization.

Core modules:

* :mod:`adsmc.plant` - uncertain affine plants and the SI engine model
* :mod:`adsmc.adc` - sample-and-hold and quantization, imprecision bounds
* :mod:`adsmc.dsmc` - SISO second-order and first-order controllers
* :mod:`adsmc.mimo` - coupled second-order controller
* :mod:`adsmc.engine_control` - engine loops for all controller modes
* :mod:`adsmc.harness` - scenarios, simulation, comparison and sweeps
"""

from .errors import (
    ConfigError,
    ContractViolation,
    DomainError,
    DsmcError,
    GammaMatrixError,
    InvalidBetaError,
    NumericOverflowError,
    ReachingGainError,
    SingularGainError,
    SpectralRadiusError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractViolation",
    "DomainError",
    "DsmcError",
    "GammaMatrixError",
    "InvalidBetaError",
    "NumericOverflowError",
    "ReachingGainError",
    "SingularGainError",
    "SpectralRadiusError",
]
