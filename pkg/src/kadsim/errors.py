"""Shared exception types."""


class ConfigError(ValueError):
    """Raised for invalid parameters, mismatched widths, malformed configs."""


class DatasetError(ValueError):
    """Raised for malformed or inconsistent city/ping datasets."""
