"""Exception hierarchy shared by every module of the package."""


class DDECCError(Exception):
    """Base class for all errors raised by ddecc_lab."""


class InputError(DDECCError, ValueError):
    """An argument violates a documented precondition."""


class NumericError(DDECCError, ValueError):
    """Non-finite values where finite ones are required."""


class ParseError(DDECCError, ValueError):
    """A matrix or config file could not be parsed.

    ``line`` is 1-based; ``column`` is the 1-based token position when known.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", token {column}"
            where += ": "
        super().__init__(where + message)


class CodeDefinitionError(DDECCError, ValueError):
    """A parity-check matrix does not define a usable code."""


class ConfigurationError(DDECCError, ValueError):
    """Mismatched dimensions or an invalid experiment/model configuration."""


class CheckpointError(DDECCError, IOError):
    """A checkpoint file is malformed; ``field`` names the offending part."""

    def __init__(self, message, field=None):
        self.field = field
        prefix = f"[{field}] " if field else ""
        super().__init__(prefix + message)


class TrainingError(DDECCError, RuntimeError):
    """Training hit a non-recoverable numeric condition."""


class InternalError(DDECCError, RuntimeError):
    """Inconsistent internal state, e.g. a stale forward cache."""
