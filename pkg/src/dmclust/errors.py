"""Exception types shared across the package."""


class DmclustError(Exception):
    """Base class for errors raised by this package."""


class IngestionError(DmclustError):
    """Raised when an input table or tree cannot be parsed or validated."""


class ConfigError(DmclustError):
    """Raised for invalid model, prior, or run configuration."""
