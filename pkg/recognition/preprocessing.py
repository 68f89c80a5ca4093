"""
Face normalization: eye location, similarity alignment, elliptical mask and
histogram equalization into a canonical N x N face.

Coordinates are pixel index coordinates: (x, y) = (column, row).
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageOps
from scipy import ndimage

from scene_sim.models import GrayImage

from .models import FaceShapeError, PreprocessingError

logger = logging.getLogger(__name__)

CANONICAL_SIZE = 64
LEFT_EYE_TARGET = (0.3, 0.35)
RIGHT_EYE_TARGET = (0.7, 0.35)
# Ellipse axes 0.78 N x 1.1 N, centered slightly below mid-face.
MASK_SEMI_AXES = (0.39, 0.55)
MASK_CENTER = (0.5, 0.55)
EYE_BAND = (0.15, 0.55)
EYE_SMOOTHING = 3
EYE_THRESHOLD_FRACTION = 0.35
MIN_EYE_CONTRAST = 40.0

Point = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class AlignedFace:
    image: GrayImage
    eyes: Tuple[Point, Point]  # source eye positions used for the warp
    matrix: np.ndarray  # output (row, col) -> input (row, col)
    offset: np.ndarray
    scale: float  # output pixels per input pixel
    angle: float  # eye-line angle in degrees

    def to_canonical(self, point: Point) -> Point:
        """Map an input (x, y) position into the canonical frame."""
        rc = np.linalg.solve(self.matrix, np.array([point[1], point[0]]) - self.offset)
        return (float(rc[1]), float(rc[0]))


def _pixels(img) -> np.ndarray:
    return np.asarray(getattr(img, 'pixels', img), dtype=float)


def _check_box(pixels: np.ndarray, face_box) -> Tuple[int, int, int, int]:
    x, y, w, h = (float(v) for v in face_box)
    height, width = pixels.shape
    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > width + 1e-9 or y + h > height + 1e-9:
        raise FaceShapeError(f"Face box {tuple(face_box)} is not inside a {width}x{height} image")
    return (int(math.floor(x)), int(math.floor(y)),
            int(min(width, math.ceil(x + w))), int(min(height, math.ceil(y + h))))


def _darkest_blob(region: np.ndarray) -> Point:
    smoothed = ndimage.uniform_filter(region, size=EYE_SMOOTHING, mode='nearest')
    low = float(smoothed.min())
    contrast = float(np.median(smoothed)) - low
    if contrast < MIN_EYE_CONTRAST:
        raise PreprocessingError(f"No eye found: contrast {contrast:.1f} below {MIN_EYE_CONTRAST}")
    threshold = low + EYE_THRESHOLD_FRACTION * contrast
    labels, _ = ndimage.label(smoothed <= threshold)
    darkest = np.unravel_index(np.argmin(smoothed), smoothed.shape)
    blob = labels[darkest]
    weights = np.where(labels == blob, threshold - smoothed, 0.0)
    row, col = ndimage.center_of_mass(weights)
    return (float(col), float(row))


def locate_eyes(img, face_box) -> Tuple[Point, Point]:
    """Dark-blob search in the upper face band, one blob per half of the box."""
    pixels = _pixels(img)
    x0, y0, x1, y1 = _check_box(pixels, face_box)
    _, by, _, bh = (float(v) for v in face_box)
    r0 = max(y0, int(round(by + EYE_BAND[0] * bh)))
    r1 = min(y1, int(round(by + EYE_BAND[1] * bh)))
    mid = (x0 + x1) // 2
    if r1 - r0 < EYE_SMOOTHING or mid - x0 < EYE_SMOOTHING or x1 - mid < EYE_SMOOTHING:
        raise PreprocessingError(f"Face box {tuple(face_box)} is too small to search for eyes")

    eyes = []
    for c0, c1 in ((x0, mid), (mid, x1)):
        ex, ey = _darkest_blob(pixels[r0:r1, c0:c1])
        eyes.append((ex + c0, ey + r0))
    return eyes[0], eyes[1]


def similarity_warp(eyes: Tuple[Point, Point], size: int) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """Output->input affine map (row/col order) sending the eyes to their canonical spots."""
    (lx, ly), (rx, ry) = eyes
    dx, dy = rx - lx, ry - ly
    distance = math.hypot(dx, dy)
    if distance < 1.0:
        raise PreprocessingError(f"Eye positions {eyes} are too close together")
    target_l = (LEFT_EYE_TARGET[0] * size, LEFT_EYE_TARGET[1] * size)
    target_r = (RIGHT_EYE_TARGET[0] * size, RIGHT_EYE_TARGET[1] * size)
    scale = (target_r[0] - target_l[0]) / distance
    angle = math.atan2(dy, dx)
    cos, sin = math.cos(angle) / scale, math.sin(angle) / scale
    matrix = np.array([[cos, sin], [-sin, cos]])
    offset = np.array([ly, lx]) - matrix @ np.array([target_l[1], target_l[0]])
    return matrix, offset, scale, math.degrees(angle)


def elliptical_mask(size: int) -> np.ndarray:
    rows, cols = np.mgrid[0:size, 0:size].astype(float)
    ax, ay = MASK_SEMI_AXES[0] * size, MASK_SEMI_AXES[1] * size
    cx, cy = MASK_CENTER[0] * size, MASK_CENTER[1] * size
    return ((cols - cx) / ax) ** 2 + ((rows - cy) / ay) ** 2 <= 1.0


def equalize_masked(pixels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    image = Image.fromarray(np.clip(np.rint(pixels), 0, 255).astype(np.uint8))
    mask_image = Image.fromarray(mask.astype(np.uint8) * 255)
    equalized = np.asarray(ImageOps.equalize(image, mask=mask_image), dtype=np.uint8)
    return np.where(mask, equalized, 0).astype(np.uint8)


def align_face(img, face_box, eye_positions: Optional[Sequence[Point]] = None,
               size: int = CANONICAL_SIZE) -> AlignedFace:
    pixels = _pixels(img)
    _check_box(pixels, face_box)
    if eye_positions is None:
        eyes = locate_eyes(pixels, face_box)
    else:
        left, right = eye_positions
        eyes = ((float(left[0]), float(left[1])), (float(right[0]), float(right[1])))

    matrix, offset, scale, angle = similarity_warp(eyes, size)
    warped = ndimage.affine_transform(pixels, matrix, offset=offset, output_shape=(size, size),
                                      order=1, mode='nearest')
    image = GrayImage(equalize_masked(warped, elliptical_mask(size)))
    logger.debug(f"Aligned face {tuple(face_box)}: eyes {eyes}, angle {angle:.1f} deg, scale {scale:.3f}")
    return AlignedFace(image=image, eyes=eyes, matrix=matrix, offset=offset, scale=scale, angle=angle)


def preprocess_face(img, face_box, eye_positions: Optional[Sequence[Point]] = None,
                    size: int = CANONICAL_SIZE) -> GrayImage:
    """
    Canonical N x N face: eyes found (or given), eye line rotated level, eyes
    placed at (0.3 N, 0.35 N) and (0.7 N, 0.35 N), background masked, lighting
    equalized. Raises PreprocessingError when the eyes cannot be found.
    """
    return align_face(img, face_box, eye_positions, size).image
