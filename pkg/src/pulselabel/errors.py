"""Exceptions shared across the package."""


class PulseLabelError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(PulseLabelError):
    """A parameter or configuration value is invalid (e.g. cutoffs vs. Nyquist)."""


class QualityTooLow(PulseLabelError):
    """A window cannot yield a usable feature vector (too few clean beats).

    Raised explicitly instead of returning a NaN vector so that callers are
    forced to handle unusable windows: they stay stored but are excluded from
    the query engine's density model.
    """


class ValidationError(PulseLabelError):
    """An incoming payload violates the wire schema. Maps to a 4xx response."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
