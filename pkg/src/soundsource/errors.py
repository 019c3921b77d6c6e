class SoundSourceError(Exception):
    """Base class for all package errors."""


class DataError(SoundSourceError, ValueError):
    """Input data violates a documented precondition (bad file, bad label, too short...)."""


class InvariantViolation(SoundSourceError, RuntimeError):
    """An internal invariant failed; indicates a bug rather than bad input."""
