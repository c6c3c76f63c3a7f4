"""Exception types shared across the package."""


class SKGError(Exception):
    """Base class for all errors raised by chirpskg."""


class ConfigurationError(SKGError, ValueError):
    """A parameter set violates its invariants."""


class DomainError(SKGError, ValueError):
    """An argument lies outside the domain of the operation."""


class UsageError(SKGError, ValueError):
    """Arguments are individually valid but inconsistent with each other."""


class DegenerateInputError(SKGError, ValueError):
    """Input data carries no spread (e.g. all powers identical)."""
