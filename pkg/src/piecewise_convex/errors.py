"""Exception hierarchy for piecewise-convex formulations."""


class PiecewiseError(Exception):
    """Base class for all package errors."""


class DomainError(PiecewiseError, ValueError):
    """Raised when a point or interval lies outside a function's domain."""


class DegenerateFunctionError(PiecewiseError):
    """Raised when f'' is identically zero (within tolerance) on a domain."""


class FormulationError(PiecewiseError):
    """Raised when a model cannot be built or a solution cannot be mapped."""


class LPError(PiecewiseError):
    """Base class for linear programming failures."""


class InfeasibleLPError(LPError):
    """Raised when an LP has no feasible point."""


class NumericalError(LPError):
    """Raised when refactorisation cannot restore basis accuracy."""


class OracleError(PiecewiseError):
    """Raised when an oracle's preconditions are not met."""


class RepairError(PiecewiseError):
    """Raised when a relaxation point cannot be repaired to a feasible one."""


class ConfigurationError(PiecewiseError, ValueError):
    """Raised for invalid configuration values or a missing executable."""


class ExternalSolverError(PiecewiseError):
    """Raised when an external solver process fails or its output is unreadable."""
