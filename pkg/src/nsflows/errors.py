"""Exception hierarchy shared by all nsflows modules."""


class NSFlowsError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(NSFlowsError, ValueError):
    pass


class MalformedFileError(NSFlowsError, OSError):
    """Field file could not be parsed; ``position`` is the byte offset of the problem."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at byte {position})"
        super().__init__(message)
        self.position = position


class TruncationError(NSFlowsError):
    """A finite representation is too small for the requested quantity."""


class NoConvergenceError(NSFlowsError):
    pass


class SingularSystemError(NSFlowsError):
    pass


class DomainError(NSFlowsError, ValueError):
    """Point or field leaves the domain where a map is defined."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class CalibrationError(NSFlowsError):
    pass


class QuadratureDivergenceError(NSFlowsError):
    pass


class PointSolveError(NSFlowsError):
    """Wraps a solver failure with the spatial point or time triple that caused it."""

    def __init__(self, message, where, cause):
        super().__init__(f"{message} at {where}: {cause}")
        self.where = where
        self.cause = cause
