"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for configuration
problems, 3 for data problems, 4 for numeric faults.
"""


class SeeplineError(Exception):
    exit_code = 1


class ConfigError(SeeplineError, ValueError):
    exit_code = 2


class DataError(SeeplineError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    """Channel list, header or dimension mismatch."""


class OrderingError(DataError):
    """Timestamps duplicated or not strictly increasing."""


class DegenerateChannelError(DataError):
    """A channel has no usable spread (all missing, or zero variance)."""


class DegenerateVarianceError(DataError):
    """A series or model output has zero variance where spread is required."""


class InsufficientDataError(DataError):
    pass


class LevelError(InsufficientDataError):
    """Decomposition level too deep for the signal length."""


class ShapeError(DataError):
    pass


class ZeroDenominatorError(DataError):
    def __init__(self, index, value):
        super().__init__(f"truth value {value!r} at index {index} is too close to zero for MAPE")
        self.index = index


class UnimputableRowError(DataError):
    def __init__(self, rows):
        rows = list(rows)
        shown = ", ".join(str(r) for r in rows[:20])
        more = f" (+{len(rows) - 20} more)" if len(rows) > 20 else ""
        super().__init__(f"predictors missing at target gaps in rows: {shown}{more}")
        self.rows = rows


class NotFoundError(DataError):
    pass


class NumericFault(SeeplineError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, epoch=None, batch=None):
        where = ""
        if epoch is not None:
            where = f" (epoch {epoch}, batch {batch})"
        super().__init__(message + where)
        self.epoch = epoch
        self.batch = batch


class StageError(SeeplineError):
    """A pipeline stage failed; keeps the underlying error and its exit code."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
