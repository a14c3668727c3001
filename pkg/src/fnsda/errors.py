"""Exception taxonomy shared across the package."""


class FnsdaError(Exception):
    """Base class for all package errors."""


class ShapeError(FnsdaError, ValueError):
    """Operands with incompatible shapes; message names both shapes."""


class DomainError(FnsdaError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ConfigError(FnsdaError, ValueError):
    """Invalid or inconsistent configuration value."""


class IntegrationError(FnsdaError, RuntimeError):
    """Numerical integration produced a non-finite state."""


class DivergenceError(FnsdaError, RuntimeError):
    """A training/adaptation loss rollout became non-finite."""


class UsageError(FnsdaError, RuntimeError):
    """An API was called in a way its contract forbids."""


class DataFormatError(FnsdaError, ValueError):
    """A serialized dataset/checkpoint file is malformed."""
