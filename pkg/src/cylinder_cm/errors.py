"""Shared exception types."""


class CylinderCMError(Exception):
    """Base class for package errors."""


class ConfigError(CylinderCMError):
    """Invalid run configuration (bad schema, unknown keys, unparsable values)."""


class NumericalError(CylinderCMError):
    """A numerical procedure failed to meet its contract."""


class NoConnectionError(NumericalError):
    """Shooting/level-set search did not locate a connecting orbit."""


class DegenerateParameters(NumericalError):
    """Parameters violate a nondegeneracy condition (vanishing denominator etc.)."""
