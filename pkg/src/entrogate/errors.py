"""Exception hierarchy shared across the package."""


class EntrogateError(Exception):
    """Base class for every error raised by this package."""


class DomainError(EntrogateError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ConfigError(EntrogateError, ValueError):
    """A configuration value violates its documented bound."""


class FormatError(EntrogateError, ValueError):
    """A file does not match the expected on-disk layout."""
