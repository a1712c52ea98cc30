"""Exception hierarchy shared by the library and the CLI.

Each class maps to one machine-parseable CLI error category and exit code.
"""


class GonError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"
    exit_code = 1


class ConfigError(GonError):
    """Invalid configuration: bad flags, bad shapes, incompatible options."""

    category = "config-error"
    exit_code = 2


class DataError(GonError):
    """Malformed or degenerate input data."""

    category = "data-error"
    exit_code = 3


class NumericError(GonError):
    """Non-finite values or a numerical procedure that cannot proceed."""

    category = "numeric-error"
    exit_code = 4


class IoError(GonError):
    """Filesystem problems: unreadable input, unwritable output."""

    category = "io-error"
    exit_code = 5
