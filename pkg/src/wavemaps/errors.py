"""Exception and warning types shared across the package."""

from __future__ import annotations


class WaveMapError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(WaveMapError, ValueError):
    """Invalid construction parameters or inconsistent configuration."""


class DomainError(WaveMapError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ResolutionError(WaveMapError):
    """The grid cannot represent the requested object."""


class ConstructionError(WaveMapError):
    """A profile with the requested constants cannot be built."""


class FitError(WaveMapError):
    """An optimiser or root finder failed to converge."""


class NumericalError(WaveMapError):
    """Numerical breakdown (blow-up, loss of conservation)."""


class AccuracyWarning(UserWarning):
    """A result is returned but its accuracy certificate is weak."""
