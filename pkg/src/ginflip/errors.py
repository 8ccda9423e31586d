"""Exception taxonomy shared across the package.

Every error that callers (tests, CLI exit-code mapping) need to tell apart
gets its own class; plain misuse that no caller dispatches on raises the
closest built-in instead.
"""


class GinflipError(Exception):
    """Base class for all package-specific errors."""


class DataFormatError(GinflipError):
    """A data file is missing, truncated, or syntactically malformed."""


class UnsupportedFormatError(GinflipError):
    """The requested serialization cannot represent the given object."""


class GraphConsistencyError(GinflipError):
    """Graph data violates structural invariants (cross-graph edges, self-loops)."""


class ParameterError(GinflipError, ValueError):
    """An argument is outside its documented domain."""


class ShapeError(GinflipError, ValueError):
    """Operands have incompatible shapes."""


class ContractError(GinflipError):
    """A value-level precondition failed (non-finite input, non-scalar loss)."""


class BitAddressError(GinflipError, ValueError):
    """A bit address does not fit the tensor it names."""


class StatisticsError(GinflipError):
    """A statistic is undefined for the sampled data (e.g. a class with < 2 graphs)."""


class LossError(GinflipError):
    """A loss is undefined on the given batch (e.g. all targets missing)."""


class TrainingDivergenceError(GinflipError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, message: str = ""):
        self.epoch = epoch
        self.batch = batch
        suffix = f" ({message})" if message else ""
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}{suffix}")


class MetricUndefinedError(GinflipError):
    """A metric is undefined for the given labels (single class, no positives)."""


class EvaluationError(GinflipError):
    """Model evaluation produced no defined metric on any task."""


class PoolError(GinflipError):
    """The input-selection pool is too small to form the required batches."""


class CheckpointError(GinflipError):
    """A checkpoint file is corrupt; carries the offending line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ConfigError(GinflipError):
    """An experiment config file is invalid (unknown key, missing section, bad value)."""
