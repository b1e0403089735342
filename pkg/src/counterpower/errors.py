"""Exception hierarchy shared across the package."""


class PowerModelError(Exception):
    """Base class for all errors raised by counterpower."""


class SchemaError(PowerModelError, ValueError):
    """Counter names or arity do not line up."""


class TraceFormatError(PowerModelError, ValueError):
    """A trace file could not be parsed.

    ``row`` and ``column`` are 1-based positions in the file when known.
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConvergenceError(PowerModelError, RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, iterations):
        super().__init__(f"{message} after {iterations} iterations")
        self.iterations = iterations


class DivergenceError(PowerModelError, FloatingPointError):
    """Training produced a non-finite loss."""


class ModelFormatError(PowerModelError, ValueError):
    """A serialized model file is malformed or of an unknown version."""
