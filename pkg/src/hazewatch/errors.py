"""Exception hierarchy shared across the package."""


class HazewatchError(Exception):
    """Base class for all errors raised by hazewatch."""


class ConfigError(HazewatchError, ValueError):
    pass


class FormatError(HazewatchError, ValueError):
    """A malformed input record.

    ``line`` is 1-based; ``column`` names the offending field when known.
    """

    def __init__(self, message, *, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DuplicateKey(FormatError):
    pass


class RuleSyntaxError(HazewatchError, SyntaxError):
    """Raised by the rule parser; ``pos`` is a 0-based character offset."""

    def __init__(self, message, source, pos):
        self.source = source
        self.pos = pos
        super().__init__(f"{message} at position {pos} in {source!r}")


class EmptyInput(HazewatchError):
    pass


class DegenerateSeries(HazewatchError, ArithmeticError):
    pass


class EmptyDistribution(HazewatchError):
    pass


class EmptyClass(HazewatchError):
    pass


class MissingSubdistricts(HazewatchError):
    pass
