"""
Deterministic synthetic face sprites composited onto a textured background.

Sprite layout in box-relative coordinates (u, v in [0, 1]):
    rounded face box, corner radius 0.2, per-identity skin tone
    dark eye discs of radius 0.07 at (0.3, 0.35) and (0.7, 0.35)
    a 3x4 block pattern over v in [0.55, 0.95] and a mouth bar, both per identity
All geometry is in pixel index coordinates: pixel (row r, col c) sits at (x=c, y=r).
"""
import hashlib
import logging
from typing import Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .models import (
    FaceSprite, GrayImage, RenderedFrame, SceneDescription, SpriteTruth, InvalidSceneError,
)

logger = logging.getLogger(__name__)

SPRITE_BASE_SIZE = 64
CORNER_RADIUS = 0.2
EYE_RADIUS = 0.07
EYE_INTENSITY = 25
LEFT_EYE = (0.3, 0.35)
RIGHT_EYE = (0.7, 0.35)
PATTERN_ROWS, PATTERN_COLS = 3, 4
PATTERN_BOX = (0.1, 0.55, 0.9, 0.95)  # u0, v0, u1, v1
PATTERN_AMPLITUDE = 45.0
MOUTH_ROWS = (0.74, 0.80)
MOUTH_INTENSITY = 60

BACKGROUND_LEVEL = 100.0
BACKGROUND_AMPLITUDE = 6.0
BACKGROUND_SMOOTHING = 20.0
SENSOR_NOISE = 4.0


class SpriteStyle:
    """Per-identity appearance derived from a hash of the label."""

    def __init__(self, identity: str):
        digest = hashlib.sha256(identity.encode('utf-8')).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], 'little'))
        self.identity = identity
        self.skin = float(rng.integers(170, 216))
        self.blocks = rng.uniform(-PATTERN_AMPLITUDE, PATTERN_AMPLITUDE, size=(PATTERN_ROWS, PATTERN_COLS))
        self.mouth_width = float(rng.uniform(0.25, 0.5))


def sprite_size(sprite: FaceSprite) -> float:
    return SPRITE_BASE_SIZE * sprite.scale


def _to_image(sprite: FaceSprite, u: float, v: float) -> Tuple[float, float]:
    size = sprite_size(sprite)
    theta = np.deg2rad(sprite.rotation)
    du, dv = (u - 0.5) * size, (v - 0.5) * size
    x = sprite.x + du * np.cos(theta) - dv * np.sin(theta)
    y = sprite.y + du * np.sin(theta) + dv * np.cos(theta)
    return (float(x), float(y))


def sprite_truth(sprite: FaceSprite) -> SpriteTruth:
    size = sprite_size(sprite)
    return SpriteTruth(
        identity=sprite.identity,
        box=(sprite.x - size / 2.0, sprite.y - size / 2.0, size, size),
        left_eye=_to_image(sprite, *LEFT_EYE),
        right_eye=_to_image(sprite, *RIGHT_EYE),
    )


def _check_bounds(sprite: FaceSprite, width: int, height: int):
    if sprite.scale <= 0:
        raise InvalidSceneError(f"Sprite '{sprite.identity}' needs a positive scale, got {sprite.scale}")
    x, y, w, h = sprite_truth(sprite).box
    if x < 0 or y < 0 or x + w > width or y + h > height:
        raise InvalidSceneError(
            f"Sprite '{sprite.identity}' at ({sprite.x}, {sprite.y}) does not fit a {width}x{height} frame"
        )


def _inside_rounded_box(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    inside = (u >= 0) & (u <= 1) & (v >= 0) & (v <= 1)
    cu = np.clip(u, CORNER_RADIUS, 1 - CORNER_RADIUS)
    cv = np.clip(v, CORNER_RADIUS, 1 - CORNER_RADIUS)
    return inside & ((u - cu) ** 2 + (v - cv) ** 2 <= CORNER_RADIUS ** 2)


def draw_sprite(canvas: np.ndarray, sprite: FaceSprite):
    """Paint one sprite into a float canvas in place."""
    style = SpriteStyle(sprite.identity)
    size = sprite_size(sprite)
    reach = size * np.sqrt(0.5) + 1
    r0, r1 = int(max(0, np.floor(sprite.y - reach))), int(min(canvas.shape[0], np.ceil(sprite.y + reach) + 1))
    c0, c1 = int(max(0, np.floor(sprite.x - reach))), int(min(canvas.shape[1], np.ceil(sprite.x + reach) + 1))
    rows, cols = np.mgrid[r0:r1, c0:c1].astype(float)

    theta = np.deg2rad(sprite.rotation)
    dx, dy = cols - sprite.x, rows - sprite.y
    u = (dx * np.cos(theta) + dy * np.sin(theta)) / size + 0.5
    v = (-dx * np.sin(theta) + dy * np.cos(theta)) / size + 0.5

    face = _inside_rounded_box(u, v)
    patch = np.full(u.shape, style.skin)

    pu0, pv0, pu1, pv1 = PATTERN_BOX
    in_pattern = (u >= pu0) & (u < pu1) & (v >= pv0) & (v < pv1)
    bi = np.clip(((v - pv0) / (pv1 - pv0) * PATTERN_ROWS).astype(int), 0, PATTERN_ROWS - 1)
    bj = np.clip(((u - pu0) / (pu1 - pu0) * PATTERN_COLS).astype(int), 0, PATTERN_COLS - 1)
    patch = np.where(in_pattern, patch + style.blocks[bi, bj], patch)

    mouth = ((v >= MOUTH_ROWS[0]) & (v < MOUTH_ROWS[1])
             & (np.abs(u - 0.5) <= style.mouth_width / 2.0))
    patch = np.where(mouth, MOUTH_INTENSITY, patch)

    for eu, ev in (LEFT_EYE, RIGHT_EYE):
        eye = (u - eu) ** 2 + (v - ev) ** 2 <= EYE_RADIUS ** 2
        patch = np.where(eye, EYE_INTENSITY, patch)

    region = canvas[r0:r1, c0:c1]
    region[face] = patch[face]


def textured_background(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    field = gaussian_filter(rng.standard_normal((height, width)), BACKGROUND_SMOOTHING, mode='wrap')
    spread = np.abs(field).max()
    if spread > 0:
        field = field / spread
    return BACKGROUND_LEVEL + BACKGROUND_AMPLITUDE * field


def render_synthetic_frame(scene: SceneDescription, width: int, height: int) -> RenderedFrame:
    """
    Composite the scene's face sprites onto a seeded background texture and
    return the 8-bit frame with per-sprite ground truth.
    """
    if width < 1 or height < 1:
        raise InvalidSceneError(f"Frame size must be positive, got {width}x{height}")
    for sprite in scene.face_sprites:
        _check_bounds(sprite, width, height)

    texture_seq, noise_seq = np.random.SeedSequence([int(scene.seed), 0x5EED]).spawn(2)
    canvas = textured_background(width, height, np.random.default_rng(texture_seq))
    for sprite in scene.face_sprites:
        draw_sprite(canvas, sprite)
    canvas += SENSOR_NOISE * np.random.default_rng(noise_seq).standard_normal(canvas.shape)

    truths = tuple(sprite_truth(sprite) for sprite in scene.face_sprites)
    logger.debug(f"Rendered {width}x{height} frame with {len(truths)} sprite(s)")
    return RenderedFrame(image=GrayImage(np.clip(np.rint(canvas), 0, 255).astype(np.uint8)), sprites=truths)
