"""Exception types shared across the package.

Shape, domain, and precondition violations raise plain ``ValueError`` with a
descriptive message. The classes below exist for conditions the CLI maps to
distinct exit codes.
"""


class ConfigError(Exception):
    """Invalid, inconsistent, or incompatible configuration. Exit code 2."""


class DataError(Exception):
    """Missing or malformed data (paths, splits, image pairs). Exit code 3."""


class NumericError(RuntimeError):
    """Non-finite values where finite ones are required. Exit code 4."""
