"""Exception types shared across the simulator."""

from __future__ import annotations


class HybridError(Exception):
    """Base class for simulator errors."""


class NumericalFailure(HybridError):
    """A flow evaluation produced a non-finite value."""

    def __init__(self, message: str, index: int | None = None, state=None):
        super().__init__(message)
        self.index = index
        self.state = state


class EventLocalizationError(HybridError):
    pass


class ContractViolation(HybridError):
    pass


class ConfigurationError(HybridError, ValueError):
    pass


class UndefinedResult(HybridError, ValueError):
    """Raised when a statistic has too little data to be defined."""
