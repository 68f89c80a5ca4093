"""
Face tracks, fusion inputs and per-frame fusion outcomes.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from recognition.models import UNKNOWN

Pixel = Tuple[float, float]
TRACK_LENGTH = 3


class FusionError(Exception):
    """Base exception for fusion errors."""
    pass


class GridBoundsError(FusionError, ValueError):
    pass


class OutcomeKind(str, Enum):
    NO_RESULT = 'NO_RESULT'
    IDENTIFIED_SPEAKER = 'IDENTIFIED_SPEAKER'
    FACE_ONLY = 'FACE_ONLY'
    UNKNOWN_SOURCE = 'UNKNOWN_SOURCE'
    SOURCE_AND_FACE_SEPARATE = 'SOURCE_AND_FACE_SEPARATE'


def _pixel(value) -> Optional[Pixel]:
    if value is None:
        return None
    x, y = value
    return (float(x), float(y))


def pixel_distance(a: Pixel, b: Pixel) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class TrackEntry:
    """One frame of track history; label None marks a frame without a face."""
    frame: int
    label: Optional[str] = None
    position: Optional[Pixel] = None

    @property
    def is_gap(self) -> bool:
        return self.label is None


@dataclass(frozen=True)
class ConfirmedFace:
    label: str
    position: Pixel


@dataclass(frozen=True)
class FaceTrack:
    history: Tuple[TrackEntry, ...] = ()
    confirmed: Optional[ConfirmedFace] = None

    def __post_init__(self):
        if len(self.history) > TRACK_LENGTH:
            raise FusionError(f"Track history holds at most {TRACK_LENGTH} entries, got {len(self.history)}")
        frames = [entry.frame for entry in self.history]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise FusionError(f"Track frame indices must be strictly increasing, got {frames}")

    @property
    def last_frame(self) -> Optional[int]:
        return self.history[-1].frame if self.history else None


@dataclass(frozen=True)
class FaceObservation:
    label: str  # identity or UNKNOWN
    position: Pixel

    def __post_init__(self):
        object.__setattr__(self, 'position', _pixel(self.position))

    @property
    def is_unknown(self) -> bool:
        return self.label == UNKNOWN

    @classmethod
    def from_recognition(cls, result) -> Optional['FaceObservation']:
        if result is None or result.center is None:
            return None
        return cls(label=result.label, position=result.center)


@dataclass(frozen=True)
class AcousticPeak:
    position: Pixel
    power: float

    def __post_init__(self):
        object.__setattr__(self, 'position', _pixel(self.position))


@dataclass(frozen=True)
class FusionOutcome:
    kind: OutcomeKind
    speaker_position: Optional[Pixel] = None
    face_identity: Optional[str] = None
    source_position: Optional[Pixel] = None
    face_position: Optional[Pixel] = None

    def __post_init__(self):
        kind = OutcomeKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        for name in ('speaker_position', 'source_position', 'face_position'):
            object.__setattr__(self, name, _pixel(getattr(self, name)))
        if kind is OutcomeKind.IDENTIFIED_SPEAKER and (self.face_identity is None or self.speaker_position is None):
            raise FusionError('An identified speaker needs an identity and a position')
        if kind is OutcomeKind.SOURCE_AND_FACE_SEPARATE:
            if self.source_position is None or self.face_position is None:
                raise FusionError('Separate source and face need both positions')
            if self.source_position == self.face_position:
                raise FusionError('Separate source and face need two distinct positions')

    def to_record(self, frame: int) -> dict:
        """Outcome line with a stable field order; absent fields are omitted."""
        record = {'frame': int(frame), 'kind': self.kind.value}
        if self.face_identity is not None:
            record['identity'] = self.face_identity
        for key, value in (('speaker_xy', self.speaker_position), ('source_xy', self.source_position),
                           ('face_xy', self.face_position)):
            if value is not None:
                record[key] = [round(value[0], 3), round(value[1], 3)]
        return record
