"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


class FitError(RuntimeError):
    """A least-squares fit is degenerate or failed to converge."""


class ConvergenceError(ArithmeticError):
    """A quadrature did not reach its tolerance within the refinement cap."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SchemaError(ValueError):
    """A CSV file does not match the expected column schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValueError):
    """A run configuration is unreadable, incomplete or has unknown keys."""


class NegativeRateWarning(UserWarning):
    """A background-subtracted rate came out negative (noise-dominated regime)."""


class UnphysicalResultWarning(UserWarning):
    """A deduced efficiency exceeds one or is otherwise unphysical."""
