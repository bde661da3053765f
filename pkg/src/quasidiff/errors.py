"""Exception types shared across the package, with stable CLI exit codes."""


class ValidationError(ValueError):
    """Violated precondition, malformed input, or degenerate configuration."""

    exit_code = 2


class ResourceLimitError(RuntimeError):
    """An enumeration or allocation exceeded its configured cap."""

    exit_code = 3


class NumericalDiagnosticError(ArithmeticError):
    """A numerical self-check failed (e.g. an autocorrelation bin collision)."""

    exit_code = 4
