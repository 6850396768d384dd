"""Shared exception types with a stable mapping onto CLI exit codes."""


class SprkitError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SprkitError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(SprkitError):
    """A documented precondition was violated by the caller."""


class NumericDomainError(SprkitError):
    """Input values leave the numerically safe domain of an operation."""


class NonFiniteLossError(SprkitError):
    """Training produced a NaN or infinite loss value."""


class DataFormatError(SprkitError):
    """An on-disk artifact is corrupt; carries the offending byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class GenerationError(SprkitError):
    """Procedural generation failed to satisfy its constraints."""


class NoPathError(SprkitError):
    """Requested grid cells are not connected."""


class ConfigError(SprkitError):
    """Invalid run configuration."""
