"""Exception types shared across the toolkit.

Every failure mode gets its own class so callers (and tests) can tell a
malformed CSV apart from a shape bug or a diverged training run without
parsing messages.
"""


class GraphcastError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(GraphcastError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class EmptyInputError(GraphcastError, ValueError):
    """An operation that needs at least one element received none."""


class ContractError(GraphcastError, ValueError):
    """An internal precondition or invariant was violated."""


class ParseError(GraphcastError, ValueError):
    """A data file could not be parsed; message carries row/column context."""


class SchemaError(GraphcastError, ValueError):
    """A data file parsed but violates the expected schema."""


class ConflictError(GraphcastError, ValueError):
    """Rows that should agree carry contradictory values."""


class ConfigError(GraphcastError, ValueError):
    """A configuration value is missing or inconsistent."""


class InsufficientDataError(GraphcastError, ValueError):
    """Not enough time points to build the requested windows."""


class DivergenceError(GraphcastError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, step: int, value: float):
        self.epoch = epoch
        self.step = step
        self.value = value
        super().__init__(
            f"non-finite loss {value!r} at epoch {epoch}, step {step}"
        )


class OracleError(GraphcastError, RuntimeError):
    """The finite-difference oracle hit a non-finite function value."""


class FatalError(GraphcastError, RuntimeError):
    """Unrecoverable CLI error; message is shown to the user as-is."""
