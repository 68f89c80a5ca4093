"""
Microphone array construction and acoustic geometry helpers.
"""
import logging
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from .models import MicArray, InvalidGeometryError, InsufficientArrayError

logger = logging.getLogger(__name__)

# Dry air at 20 degrees Celsius.
SPEED_OF_SOUND = 343.0


def _ring(radius: float, count: int, offset: float) -> np.ndarray:
    angles = offset + 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles), np.zeros(count)])


def build_double_ring_array(inner_diameter: float = 0.2, outer_diameter: float = 0.4,
                            n_inner: int = 7, n_outer: int = 9,
                            angular_offset: float = 0.0, name: str = 'double-ring') -> MicArray:
    """
    Two concentric rings in the z = 0 plane. The inner ring starts at angle 0,
    the outer ring is rotated by angular_offset radians.
    """
    values = (inner_diameter, outer_diameter, angular_offset)
    if not all(np.isfinite(v) for v in values):
        raise InvalidGeometryError(f"Ring geometry must be finite, got {values}")
    if inner_diameter <= 0 or outer_diameter <= 0:
        raise InvalidGeometryError(
            f"Ring diameters must be positive, got {inner_diameter} and {outer_diameter}"
        )
    if outer_diameter <= inner_diameter:
        raise InvalidGeometryError(
            f"Outer diameter {outer_diameter} must exceed inner diameter {inner_diameter}"
        )
    if n_inner < 0 or n_outer < 0 or n_inner + n_outer == 0:
        raise InvalidGeometryError(f"Invalid microphone counts ({n_inner}, {n_outer})")

    mics = np.vstack([
        _ring(inner_diameter / 2.0, int(n_inner), 0.0),
        _ring(outer_diameter / 2.0, int(n_outer), angular_offset),
    ])
    logger.debug(f"Built {name} array with {n_inner}+{n_outer} microphones")
    return MicArray(mics=mics, name=name)


def min_mic_distance(array: MicArray) -> float:
    if array.size < 2:
        raise InsufficientArrayError(f"Array '{array.name}' has {array.size} microphone(s); need at least 2")
    return float(pdist(array.mics).min())


def spatial_alias_limit(array: MicArray, speed_of_sound: float = SPEED_OF_SOUND) -> float:
    """Highest frequency (Hz) sampled without spatial aliasing: c / (2 * d_min)."""
    return speed_of_sound / (2.0 * min_mic_distance(array))


def expected_tdoa(array: MicArray, pair: Tuple[int, int], point: Sequence[float],
                  speed_of_sound: float = SPEED_OF_SOUND) -> float:
    """
    (|point - mic_a| - |point - mic_b|) / c in seconds. Positive when the
    wavefront reaches mic_b first.
    """
    a, b = pair
    for index in (a, b):
        if not 0 <= index < array.size:
            raise InvalidGeometryError(f"Microphone index {index} out of range for {array.size} microphones")
    point = np.asarray(point, dtype=float)
    if point.shape != (3,) or not np.all(np.isfinite(point)):
        raise InvalidGeometryError(f"Point must be a finite 3-vector, got {point}")
    d_a = np.linalg.norm(point - array.mics[a])
    d_b = np.linalg.norm(point - array.mics[b])
    return float((d_a - d_b) / speed_of_sound)


def mic_distances(array: MicArray, points: np.ndarray) -> np.ndarray:
    """Distances (meters) from each of K points to each microphone, shape (K, M)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return np.linalg.norm(points[:, None, :] - array.mics[None, :, :], axis=-1)


def pair_indices(array: MicArray) -> Tuple[np.ndarray, np.ndarray]:
    """All unordered microphone pairs (a < b)."""
    return np.triu_indices(array.size, k=1)
