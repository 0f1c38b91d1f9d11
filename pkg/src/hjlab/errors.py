"""Exception hierarchy shared by every hjlab module."""


class HJLabError(Exception):
    """Base class for all errors raised by hjlab."""


class InvalidDomainError(HJLabError, ValueError):
    pass


class ResolutionError(HJLabError, ValueError):
    pass


class InputError(HJLabError, ValueError):
    pass


class CompatibilityError(HJLabError, ValueError):
    """Fields or trajectories live on different grids or time lines."""


class StabilityError(HJLabError):
    """A time step violates the explicit CFL restriction."""


class SolverError(HJLabError):
    """A linear solve failed or produced non-finite values."""


class PositivityFault(HJLabError):
    """A density went negative beyond round-off; signals a bug, not bad input."""


class RangeError(HJLabError, ValueError):
    pass


class HypothesisError(HJLabError):
    """Problem data do not satisfy the hypotheses of the estimate requested."""


class DegenerateFitError(HJLabError, ValueError):
    pass


class CatalogError(HJLabError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(HJLabError, ValueError):
    pass


class InconclusiveResolution(HJLabError):
    """Discretization error is too large to resolve the viscosity effect."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
