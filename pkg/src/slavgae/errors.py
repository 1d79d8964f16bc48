"""Exception hierarchy shared by every module of the engine."""


class SlaVgaeError(Exception):
    """Base class for all engine errors."""


class DimensionError(SlaVgaeError, ValueError):
    """Operand shapes are incompatible."""


class NumericError(SlaVgaeError, ArithmeticError):
    """A computation produced NaN or infinite values."""


class InvalidConfigError(SlaVgaeError, ValueError):
    """A hyperparameter or configuration value is out of range."""


class InvalidStateError(SlaVgaeError, RuntimeError):
    """An operation was requested in a state where it cannot proceed."""


class InvalidQueryError(SlaVgaeError, LookupError):
    """A query asked for something that does not exist (e.g. an empty role)."""


class ParseError(SlaVgaeError, ValueError):
    """A dataset file is malformed.

    Carries the offending file and 1-based line number (``None`` when the
    problem is not tied to a single line).
    """

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


class MissingFileError(ParseError):
    pass


class RaggedRowError(ParseError):
    pass


class IdOutOfRangeError(ParseError):
    pass


class DuplicateLabelError(ParseError):
    pass
