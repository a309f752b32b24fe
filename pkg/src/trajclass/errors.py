"""Exception hierarchy shared by every module.

Each class carries an ``exit_code`` used by the command-line front end.
"""


class TrajclassError(Exception):
    exit_code = 1


class ParameterError(TrajclassError, ValueError):
    """Invalid numeric parameter (negative sigma, order outside (0, 1), ...)."""

    exit_code = 3


class UsageError(TrajclassError):
    exit_code = 3


class InsufficientDataError(TrajclassError, ValueError):
    exit_code = 3


class DegenerateTrajectoryError(TrajclassError, ValueError):
    """Raised for motionless tracks, where the diffusion estimate is zero."""

    exit_code = 3


class TableMismatchError(TrajclassError, ValueError):
    exit_code = 3


class ParseError(TrajclassError):
    exit_code = 4

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TableFormatError(TrajclassError):
    exit_code = 4
