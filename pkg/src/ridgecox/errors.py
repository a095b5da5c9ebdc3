"""Exception types shared across the package."""


class RidgecoxError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RidgecoxError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ParameterError(RidgecoxError, ValueError):
    """Invalid configuration or parameter value."""


class SingularDenominatorError(RidgecoxError, ValueError):
    """Spectral average with a vanishing denominator (eta = g_tilde = 0)."""


class DegenerateInputError(RidgecoxError, ValueError):
    """Input data degenerate for the requested statistic (e.g. zero signal)."""


class InsufficientDataError(RidgecoxError, ValueError):
    """Too few usable data points for the requested estimate."""


class InvalidSolutionError(RidgecoxError, ValueError):
    """Order-parameter values violate the constraints of a valid solution."""


class SolverError(RidgecoxError, RuntimeError):
    """Iterative solver failed to converge."""

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class PhaseBoundaryError(SolverError):
    """Requested solution lies at or beyond a phase boundary (eta=0, zeta>=1)."""


class CalibrationError(SolverError):
    """Failed to bracket or refine the unbiased regularization strength."""


class RankDeficiencyError(RidgecoxError, RuntimeError):
    """Unpenalized Hessian is rank deficient (only possible at eta = 0)."""
