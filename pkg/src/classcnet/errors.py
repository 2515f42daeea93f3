"""Exception hierarchy shared by all modules."""


class ClassCError(Exception):
    """Base class for package errors."""


class ParameterError(ClassCError, ValueError):
    """Invalid argument combination (bad channel index, size mismatch, ...)."""


class ConditioningError(ClassCError, ArithmeticError):
    """A linear solve did not meet its residual contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegeneratePrefixError(ClassCError, ZeroDivisionError):
    """Conditional weight requested after a history whose weight vanishes."""


class NonProbabilisticNodeError(ClassCError):
    """A conditional weight met by the walk sampler is negative."""

    def __init__(self, message, node=None, history=None, weights=None):
        super().__init__(message)
        self.node = node
        self.history = history
        self.weights = weights


class ResourceError(ClassCError, RuntimeError):
    """An exhaustive computation exceeded its configured ceiling."""


class GraphParseError(ClassCError, ValueError):
    """Malformed graph document. ``where`` locates the offending field."""

    def __init__(self, message, where=None):
        text = f"{where}: {message}" if where else message
        super().__init__(text)
        self.where = where


class StatisticsError(ClassCError, RuntimeError):
    """Too few samples for a requested estimate."""


class ConfigError(ClassCError, ValueError):
    """Unusable run configuration (missing seed, unresolvable path, bad flag)."""
