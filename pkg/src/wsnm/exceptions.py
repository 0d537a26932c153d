"""Exception hierarchy shared by every wsnm module."""


class WsnmError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(WsnmError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(WsnmError, ValueError):
    """Operands have incompatible shapes."""


class OrderingError(WsnmError, ValueError):
    """Weights lack the non-descending certificate required for optimality."""


class ConvergenceError(WsnmError, RuntimeError):
    """An iterative kernel exhausted its budget.

    ``residual`` carries the last achieved off-diagonal / residual norm.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(WsnmError, FloatingPointError):
    """A solver produced a non-finite intermediate at ``iteration``."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
