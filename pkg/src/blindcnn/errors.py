"""Exception types shared across the package."""


class DimensionError(ValueError):
    """An array axis does not satisfy an operation's shape contract."""


class ConfigurationError(ValueError):
    """A configuration value, or combination of values, cannot be honored."""


class FormatError(ValueError):
    """A dataset file does not match its declared binary format."""
