"""
Color map rendering: blue -> green -> red over [min, max] power.
"""
import json
import logging
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw

from .models import SteeredPowerMap

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def power_to_rgb(power: np.ndarray) -> np.ndarray:
    """
    Map an (n_u, n_v) power array to an (n_v, n_u, 3) uint8 image, so that
    image rows follow v and columns follow u. A flat map renders blue.
    """
    power = np.asarray(power, dtype=float)
    lo, hi = power.min(), power.max()
    t = (power - lo) / (hi - lo) if hi > lo else np.zeros_like(power)
    t = t.T
    rgb = np.empty(t.shape + (3,))
    low = t < 0.5
    rgb[..., 0] = np.where(low, 0.0, 2.0 * t - 1.0)
    rgb[..., 1] = np.where(low, 2.0 * t, 2.0 - 2.0 * t)
    rgb[..., 2] = np.where(low, 1.0 - 2.0 * t, 0.0)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def color_map_image(power_map: SteeredPowerMap, size: Optional[Tuple[int, int]] = None) -> Image.Image:
    image = Image.fromarray(power_to_rgb(power_map.power))
    if size is not None:
        image = image.resize(size, Image.Resampling.NEAREST)
    return image


def write_color_map(power_map: SteeredPowerMap, path: PathLike,
                    size: Optional[Tuple[int, int]] = None) -> Path:
    """Binary PPM (P6), one pixel per cell unless ``size`` is given."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    color_map_image(power_map, size).save(path, format='PPM')
    return path


def write_power_matrix(power_map: SteeredPowerMap, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        'mode': power_map.mode_used.value,
        'n_u': power_map.grid.n_u,
        'n_v': power_map.grid.n_v,
        'power': [[round(float(value), 9) for value in row] for row in power_map.power],
    }
    path.write_text(json.dumps(payload, sort_keys=True) + '\n')
    return path


def write_overlay(gray: np.ndarray, power_map: SteeredPowerMap, path: PathLike,
                  boxes: Iterable[Tuple[float, float, float, float]] = (),
                  speaker_xy: Optional[Tuple[float, float]] = None,
                  label: Optional[str] = None, alpha: float = 0.4) -> Path:
    """
    Camera frame blended with the color map, detection boxes in white and
    the speaker position circled in red.
    """
    height, width = gray.shape
    frame = Image.fromarray(np.asarray(gray, dtype=np.uint8)).convert('RGB')
    overlay = Image.blend(frame, color_map_image(power_map, (width, height)), alpha)
    draw = ImageDraw.Draw(overlay)
    for x, y, w, h in boxes:
        draw.rectangle([x, y, x + w, y + h], outline=(255, 255, 255))
    if speaker_xy is not None:
        sx, sy = speaker_xy
        radius = max(width, height) * 0.03
        draw.ellipse([sx - radius, sy - radius, sx + radius, sy + radius], outline=(255, 0, 0), width=2)
        if label:
            draw.text((sx + radius + 2, sy - radius), label, fill=(255, 0, 0))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    overlay.save(path, format='PPM')
    return path
