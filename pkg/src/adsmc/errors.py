"""Exception hierarchy shared by every module of the toolkit."""


class DsmcError(Exception):
    """Base class for all toolkit errors."""


class ContractViolation(DsmcError, ValueError):
    """A caller broke a documented precondition (shapes, time order, ...)."""


class DomainError(DsmcError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularGainError(DsmcError, ArithmeticError):
    """An input gain (scalar g or matrix Upsilon) is zero or ill-conditioned."""


class NumericOverflowError(DsmcError, ArithmeticError):
    """A computation produced a non-finite value."""


class ConfigError(DsmcError, ValueError):
    """Invalid controller or scenario configuration.

    ``violations`` lists every violated invariant, not just the first.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [message]


class InvalidBetaError(ConfigError):
    """Scalar second-order gain outside (0, 1)."""


class SpectralRadiusError(ConfigError):
    """Gain matrix with an eigenvalue on or outside the unit circle."""


class ReachingGainError(ConfigError):
    """Reaching-law gain with T*lambda outside (0, 1)."""


class GammaMatrixError(ConfigError):
    """Adaptation matrix that is not symmetric positive definite."""
