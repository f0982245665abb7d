"""Exception types raised across the package."""


class MEMError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(MEMError, ValueError):
    pass


class NonScalarOutput(MEMError, ValueError):
    pass


class DegenerateVector(MEMError, ValueError):
    pass


class IndexOutOfRange(MEMError, IndexError):
    pass


class CheckpointCorrupt(MEMError):
    pass


class KTooLarge(MEMError, ValueError):
    pass


class DegenerateSample(MEMError, ValueError):
    pass


class StreamLengthMismatch(MEMError, ValueError):
    pass


class EmptyGroup(MEMError, ValueError):
    pass


class InvalidSpec(MEMError, ValueError):
    pass


class EpisodeFinished(MEMError, RuntimeError):
    pass


class NotEnoughData(MEMError, ValueError):
    pass


class ConfigInvalid(MEMError, ValueError):
    pass


class ParseError(MEMError):
    """Config text could not be parsed; carries the offending position."""

    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class ValidationError(ConfigInvalid):
    """A config field failed validation."""

    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
