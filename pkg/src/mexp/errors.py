"""Exception classes shared across the package, mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid configuration value or unparseable config file (exit code 2)."""


class DataError(ValueError):
    """Missing, malformed, or inconsistent input data (exit code 3)."""


class NumericError(ArithmeticError):
    """Numeric failure such as non-finite input to a solver (exit code 4)."""
