"""Exception types shared across the package.

Each carries the CLI exit code it maps to.
"""


class KochSkewError(Exception):
    exit_code = 1


class ParameterError(KochSkewError, ValueError):
    exit_code = 2


class ConfigError(ParameterError):
    """Bad configuration text; `line` is 1-based or None."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GeometryError(KochSkewError):
    exit_code = 3


class DomainError(KochSkewError, ValueError):
    """A point was queried outside the region where a field is defined."""

    exit_code = 3


class IntegrityError(KochSkewError, RuntimeError):
    exit_code = 3


class StatisticalFailure(KochSkewError):
    exit_code = 4
