"""Exception types shared across the toolkit."""


class AperiodicError(Exception):
    """Base class for toolkit errors."""


class ConfigError(AperiodicError, ValueError):
    """Malformed or inconsistent input (config file, arguments, geometry)."""


class CapExceededError(AperiodicError):
    """An enumeration or matrix size would exceed a configured cap."""
