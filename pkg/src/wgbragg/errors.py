"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: validation problems exit 1,
numerical or capability problems exit 2.
"""


class WgBraggError(Exception):
    """Base class for all package errors."""


class ValidationError(WgBraggError):
    """Invalid parameter values or inconsistent configuration input."""


class ConfigurationError(ValidationError):
    """A requested combination of options is not allowed (e.g. tier/params mismatch)."""


class CapabilityError(WgBraggError):
    """The request exceeds what an implementation tier can handle (e.g. Hilbert space size)."""


class NumericalError(WgBraggError):
    """A computation failed numerically (singular solve, out-of-range angle, degenerate null space)."""
