"""Shared exception types."""


class ShapeError(ValueError):
    """Array dimensions do not satisfy an operation's contract."""


class FormatError(ValueError):
    """A persisted file violates its declared format."""


class ConfigError(ValueError):
    """A run configuration is missing, malformed, or contradictory."""


class ContractError(RuntimeError):
    """An operation was invoked on a state that forbids it."""
