"""Exception types shared across the package."""


class EmtsimError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EmtsimError):
    """A vector or matrix argument has the wrong length/shape."""


class ParameterError(EmtsimError):
    """A numeric parameter is out of its valid range."""


class UsageError(EmtsimError):
    """An operation was called with incompatible objects or modes."""


class SolverError(EmtsimError):
    """The linearized system could not be solved (singular or non-finite)."""


class ConvergenceError(EmtsimError):
    """Newton iteration exhausted its budget without meeting tolerance."""

    def __init__(self, message, residual_norm=None, iterations=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularityError(EmtsimError):
    """A closed-form expression is undefined for the given coefficients."""


class SchedulingError(EmtsimError):
    """An event time does not coincide with a step boundary."""


class ModelError(EmtsimError):
    """A network model is structurally invalid."""


class WindowError(EmtsimError):
    """A comparison window lies outside the overlap of two series."""


class CsvFormatError(EmtsimError):
    """A CSV file could not be parsed."""

    def __init__(self, message, line_no=None):
        super().__init__(message)
        self.line_no = line_no
