"""Exception and warning types shared across the package."""


class KopropError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(KopropError):
    """Invalid or inconsistent experiment configuration."""


class NumericsError(KopropError):
    """A numerical operation could not be completed reliably."""


class IntegrationError(NumericsError):
    """The ODE integrator failed (step-size underflow, divergence, ...)."""


class EigendecompositionError(NumericsError):
    """Eigendecomposition residual or conditioning beyond tolerance."""


class MatrixLogBranchError(NumericsError):
    """An eigenvalue lies on or near the negative real axis, so the
    principal matrix logarithm is undefined."""


class RankDeficiencyError(NumericsError):
    """A least-squares system is rank deficient beyond the cutoff."""


class GridValueError(NumericsError):
    """A grid evaluation produced non-finite or otherwise unusable values."""


class ExtrapolationWarning(UserWarning):
    """Evaluation points fall outside the basis training box; polynomial
    extrapolation is permitted but increasingly unreliable."""


class ImaginaryPartWarning(UserWarning):
    """A nominally real result carried an unexpectedly large imaginary
    residual that was discarded."""


class ConditioningWarning(UserWarning):
    """A linear system is poorly conditioned or rank deficient; results were
    regularized via a pseudo-inverse cutoff."""
