"""Exception types shared across the package, mapped to CLI exit codes."""


class ValidationError(ValueError):
    """Input data, file format, or argument failed validation (exit code 2)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a usable result (exit code 3)."""
