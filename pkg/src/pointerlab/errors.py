"""Exception types shared across the package."""


class PointerlabError(Exception):
    """Base class for all package errors."""


class NormError(PointerlabError):
    """Field or density has an invalid norm for the requested operation."""


class GridError(PointerlabError):
    """Grids are incompatible or a grid parameter is invalid."""


class ConfigError(PointerlabError):
    """A configuration value is invalid or violates a stability bound."""


class DivergenceError(PointerlabError):
    """NaN or Inf appeared during time evolution."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FitError(PointerlabError):
    """A fit window is unusable (too few points, non-monotone, unwrap failure)."""


class JumpUndefinedError(PointerlabError):
    """Jump operator is undefined because the jump rate vanishes."""


class UnstableEquilibriumError(PointerlabError):
    """Quantity diverges at an unstable equilibrium (e.g. equal weights)."""


class TimeoutError(PointerlabError):  # noqa: A001 - deliberate shadow, package-local
    """A stochastic trajectory failed to reach a fixed point in time."""


class OracleError(PointerlabError):
    """Reference solver violated one of its exactness guarantees."""


class SupportError(PointerlabError):
    """Observed counts fall outside the support of the expected distribution."""


class DomainError(PointerlabError):
    """A classical trajectory left the configured position domain."""
