"""Shared exception types."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class InsufficientDataError(RuntimeError):
    """A bin does not hold enough samples to produce the requested estimate."""


class CapacityError(RuntimeError):
    """The accumulator store would exceed its configured memory cap."""
