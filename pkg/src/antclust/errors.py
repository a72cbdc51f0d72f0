"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code (see cli.EXIT_CODES).
"""


class AntclustError(Exception):
    """Base class for all package errors."""


class ConfigError(AntclustError):
    """Invalid configuration, parameters, or arguments. Exit code 1."""


class DataError(AntclustError):
    """Malformed or insufficient input data. Exit code 2."""


class InternalError(AntclustError):
    """A runtime invariant was violated. Exit code 3."""
