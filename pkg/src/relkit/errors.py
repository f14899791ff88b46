"""Exception and warning types raised by relkit."""


class ReliabilityError(ValueError):
    """Base class for every error raised by the toolkit."""


class InputShapeError(ReliabilityError):
    pass


class EmptyInputError(ReliabilityError):
    pass


class ParameterError(ReliabilityError):
    pass


class DivergenceError(ReliabilityError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
        self.epoch = epoch
        self.loss = loss


class ConfigError(ReliabilityError):
    pass


class SchemaError(ReliabilityError):
    pass


class ParseError(ReliabilityError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class FitError(ReliabilityError):
    pass


class FormatVersionError(ReliabilityError):
    pass


class ReliabilityWarning(UserWarning):
    """Non-fatal condition recorded during fitting (constant features, degenerate proxy)."""
