"""Exception hierarchy shared across the toolkit.

CLI exit codes: 2 for schema/config problems, 3 for missing upstream
artifacts, 4 for numerical divergence.
"""


class CdsgenError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class SchemaError(CdsgenError):
    """Malformed input file or mismatched artifact schema."""

    exit_code = 2


class ConfigError(CdsgenError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DependencyError(CdsgenError):
    """A required upstream artifact is missing."""

    exit_code = 3


class DivergenceError(CdsgenError):
    """Training produced a non-finite loss."""

    exit_code = 4


class MeasureUndefinedError(CdsgenError):
    """A corpus measure is undefined on the given input (e.g. empty sample)."""

    exit_code = 1
