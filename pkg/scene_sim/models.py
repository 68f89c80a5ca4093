"""
Domain types for synthetic scenes: microphone arrays, scene descriptions,
multichannel signals and grayscale frames.

Nothing here is stored in the database; these are plain dataclasses shared
by the localization, detection and recognition apps.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

# Minimum spacing between two microphones (meters).
MIN_MIC_SPACING = 1e-3


class SceneError(Exception):
    """Base exception for scene construction and synthesis errors."""
    pass


class InvalidGeometryError(SceneError, ValueError):
    """Raised for non-positive, non-finite or overlapping array geometry."""
    pass


class InsufficientArrayError(SceneError, ValueError):
    """Raised when an operation needs more microphones than the array has."""
    pass


class InvalidSceneError(SceneError, ValueError):
    """Raised for scenes that cannot be synthesized or rendered."""
    pass


@dataclass(frozen=True, eq=False)
class MicArray:
    """Microphone positions in meters, array plane at z = 0."""
    mics: np.ndarray
    name: str = 'array'

    def __post_init__(self):
        mics = np.asarray(self.mics, dtype=float)
        if mics.ndim == 1 and mics.size == 3:
            mics = mics.reshape(1, 3)
        if mics.ndim != 2 or mics.shape[1] != 3 or mics.shape[0] < 1:
            raise InvalidGeometryError(f"Array '{self.name}' needs at least one 3-vector position, got shape {mics.shape}")
        if not np.all(np.isfinite(mics)):
            raise InvalidGeometryError(f"Array '{self.name}' has non-finite microphone positions")
        if mics.shape[0] > 1:
            from scipy.spatial.distance import pdist
            closest = pdist(mics).min()
            if closest < MIN_MIC_SPACING:
                raise InvalidGeometryError(
                    f"Array '{self.name}' has microphones {closest * 1000:.3f} mm apart "
                    f"(minimum {MIN_MIC_SPACING * 1000:.0f} mm)"
                )
        mics.setflags(write=False)
        object.__setattr__(self, 'mics', mics)

    @property
    def size(self) -> int:
        return self.mics.shape[0]

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class Echo:
    """Discrete reflection: extra delay in seconds and linear gain."""
    delay_s: float
    gain: float


@dataclass(frozen=True)
class SourceSpec:
    position: Tuple[float, float, float]
    signal_kind: str = 'white_noise'  # sine | white_noise | sample
    level: float = 1.0
    frequency: Optional[float] = None
    sample_path: Optional[str] = None
    echoes: Tuple[Echo, ...] = ()


@dataclass(frozen=True)
class FaceSprite:
    """A synthetic face centered at pixel (x, y); scale 1 is a 64 px box."""
    identity: str
    x: float
    y: float
    scale: float = 1.0
    rotation: float = 0.0  # degrees


@dataclass(frozen=True)
class SceneDescription:
    """
    Everything needed to regenerate one scene. The seed fully determines all
    randomness; snr_db of None means no sensor noise unless noise_power is set.
    """
    sources: Tuple[SourceSpec, ...] = ()
    snr_db: Optional[float] = 20.0
    seed: int = 0
    face_sprites: Tuple[FaceSprite, ...] = ()
    speed_of_sound: float = 343.0
    noise_power: Optional[float] = None


@dataclass(frozen=True, eq=False)
class MultichannelSignal:
    sample_rate: float
    channels: np.ndarray

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=float)
        if channels.ndim == 1:
            channels = channels.reshape(1, -1)
        if channels.ndim != 2 or channels.shape[1] < 1:
            raise InvalidSceneError(f"Signal needs a C x N sample matrix with N >= 1, got shape {channels.shape}")
        if not self.sample_rate > 0:
            raise InvalidSceneError(f"Sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, 'channels', channels)

    @property
    def channel_count(self) -> int:
        return self.channels.shape[0]

    @property
    def length(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image stored row-major as a (height, width) array."""
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise InvalidSceneError(f"Image needs a non-empty 2-D pixel array, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            pixels = np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
        object.__setattr__(self, 'pixels', pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def blank(cls, width: int, height: int, value: int = 0) -> 'GrayImage':
        return cls(np.full((height, width), value, dtype=np.uint8))


@dataclass(frozen=True)
class SpriteTruth:
    """Ground truth for a rendered sprite, in pixel index coordinates (x, y)."""
    identity: str
    box: Tuple[float, float, float, float]
    left_eye: Tuple[float, float]
    right_eye: Tuple[float, float]

    @property
    def center(self) -> Tuple[float, float]:
        x, y, w, h = self.box
        return (x + w / 2.0, y + h / 2.0)


@dataclass(frozen=True, eq=False)
class RenderedFrame:
    image: GrayImage
    sprites: Tuple[SpriteTruth, ...] = field(default_factory=tuple)
