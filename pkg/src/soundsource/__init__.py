"""Sound source identification (live human vs. playback device) from acoustic cues."""

from .errors import DataError, InvariantViolation, SoundSourceError

SAMPLE_RATE = 16000
LABELS = ("human", "loudspeaker", "ipod", "headphone")
PLAYBACK_LABELS = ("loudspeaker", "ipod", "headphone")

__all__ = [
    "SAMPLE_RATE",
    "LABELS",
    "PLAYBACK_LABELS",
    "SoundSourceError",
    "DataError",
    "InvariantViolation",
]
__version__ = "0.1.0"
