"""Exception hierarchy shared across the package."""


class SemnomaError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SemnomaError, ValueError):
    """Invalid scenario, catalog or run configuration."""


class NumericalError(SemnomaError, ArithmeticError):
    """A numerical routine could not proceed (singular matrix, non-finite loss)."""


class InfeasibleError(SemnomaError):
    """A convex subproblem has no strictly feasible point."""


class CheckpointVersionError(SemnomaError):
    """Checkpoint was written with an unsupported format version."""
