"""
Integral images, Haar-like features and local binary patterns.
"""
import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from scene_sim.models import GrayImage

from .models import (
    BASE_WINDOW, HaarFeature, HaarRect, IntegralImage, LbpPosition, LbpStage, WeakClassifier,
    BoundsError,
)

logger = logging.getLogger(__name__)

# kind -> (base width, base height, [(x, y, w, h, weight)] in base units)
HAAR_TYPES: Dict[str, Tuple[int, int, Tuple[Tuple[int, int, int, int, int], ...]]] = {
    'two_h': (2, 1, ((0, 0, 1, 1, 1), (1, 0, 1, 1, -1))),
    'two_v': (1, 2, ((0, 0, 1, 1, 1), (0, 1, 1, 1, -1))),
    'three_h': (3, 1, ((0, 0, 1, 1, 1), (1, 0, 1, 1, -2), (2, 0, 1, 1, 1))),
    'three_v': (1, 3, ((0, 0, 1, 1, 1), (0, 1, 1, 1, -2), (0, 2, 1, 1, 1))),
    'four': (2, 2, ((0, 0, 1, 1, 1), (1, 0, 1, 1, -1), (0, 1, 1, 1, -1), (1, 1, 1, 1, 1))),
}

# Neighbor offsets (dx, dy) from the top-left, clockwise; the first is the
# most significant bit.
LBP_NEIGHBORS = ((-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0))


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, GrayImage) else np.asarray(img)


def integral_image(img) -> IntegralImage:
    pixels = _pixels(img).astype(np.int64)
    table = np.zeros((pixels.shape[0] + 1, pixels.shape[1] + 1), dtype=np.int64)
    table[1:, 1:] = pixels.cumsum(axis=0).cumsum(axis=1)
    return IntegralImage(table=table)


def rect_sum(ii: IntegralImage, x: int, y: int, w: int, h: int) -> int:
    """Sum of the w x h rectangle with top-left pixel (x, y), via 4 lookups."""
    if w < 0 or h < 0 or x < 0 or y < 0 or x + w > ii.width or y + h > ii.height:
        raise BoundsError(f"Rect ({x}, {y}, {w}, {h}) leaves the {ii.width}x{ii.height} image")
    t = ii.table
    return int(t[y + h, x + w] - t[y + h, x] - t[y, x + w] + t[y, x])


def rect_sums(table: np.ndarray, xs: np.ndarray, ys: np.ndarray, w: int, h: int) -> np.ndarray:
    """Vectorized rect_sum for many origins sharing one rect size; no bounds checks."""
    return table[ys + h, xs + w] - table[ys + h, xs] - table[ys, xs + w] + table[ys, xs]


def _make_feature(kind: str, x: int, y: int, w: int, h: int, window: Tuple[int, int]) -> HaarFeature:
    bw, bh, layout = HAAR_TYPES[kind]
    cw, ch = w // bw, h // bh
    rects = tuple(HaarRect(x + rx * cw, y + ry * ch, cw, ch, weight) for rx, ry, _, _, weight in layout)
    return HaarFeature(kind=kind, rects=rects, window=window)


def enumerate_haar_features(window: Tuple[int, int] = BASE_WINDOW,
                            kinds: Optional[Iterable[str]] = None) -> List[HaarFeature]:
    """Every position and scale of the given feature types inside the window."""
    ww, wh = window
    features = []
    for kind in (kinds or HAAR_TYPES):
        bw, bh, _ = HAAR_TYPES[kind]
        for w in range(bw, ww + 1, bw):
            for h in range(bh, wh + 1, bh):
                for y in range(0, wh - h + 1):
                    for x in range(0, ww - w + 1):
                        features.append(_make_feature(kind, x, y, w, h, window))
    logger.debug(f"Enumerated {len(features)} Haar features in a {ww}x{wh} window")
    return features


def count_haar_features(window: Tuple[int, int] = BASE_WINDOW,
                        kinds: Optional[Iterable[str]] = None) -> int:
    """Closed-form count matching enumerate_haar_features."""
    ww, wh = window
    total = 0
    for kind in (kinds or HAAR_TYPES):
        bw, bh, _ = HAAR_TYPES[kind]
        nx, ny = ww // bw, wh // bh
        # sum_{i=1..nx} (ww - i*bw + 1) * sum_{j=1..ny} (wh - j*bh + 1)
        sx = nx * (ww + 1) - bw * nx * (nx + 1) // 2
        sy = ny * (wh + 1) - bh * ny * (ny + 1) // 2
        total += sx * sy
    return total


def scaled_rect(rect: HaarRect, scale: float) -> Tuple[int, int, int, int]:
    return (int(round(rect.x * scale)), int(round(rect.y * scale)),
            max(1, int(round(rect.w * scale))), max(1, int(round(rect.h * scale))))


def window_area(window: Tuple[int, int], scale: float) -> int:
    return max(1, int(round(window[0] * scale))) * max(1, int(round(window[1] * scale)))


def feature_values(table: np.ndarray, xs: np.ndarray, ys: np.ndarray, scale: float,
                   feature: HaarFeature) -> np.ndarray:
    """f for many window origins: weighted rect sums over the scaled window area."""
    total = np.zeros(np.shape(xs), dtype=np.int64)
    for rect in feature.rects:
        rx, ry, rw, rh = scaled_rect(rect, scale)
        total += rect.weight * rect_sums(table, xs + rx, ys + ry, rw, rh)
    return total / window_area(feature.window, scale)


def check_window(ii: IntegralImage, origin: Tuple[int, int], scale: float, window: Tuple[int, int]):
    x0, y0 = origin
    w = int(round(window[0] * scale))
    h = int(round(window[1] * scale))
    if x0 < 0 or y0 < 0 or x0 + w > ii.width or y0 + h > ii.height:
        raise BoundsError(f"Window {w}x{h} at ({x0}, {y0}) leaves the {ii.width}x{ii.height} image")


def feature_extent(feature: HaarFeature, scale: float) -> Tuple[int, int]:
    """Right and bottom edge of the scaled feature, relative to the window origin."""
    right = max([int(round(feature.window[0] * scale)), *(sum(scaled_rect(r, scale)[0::2]) for r in feature.rects)])
    bottom = max([int(round(feature.window[1] * scale)), *(sum(scaled_rect(r, scale)[1::2]) for r in feature.rects)])
    return right, bottom


def haar_feature_value(ii: IntegralImage, origin: Tuple[int, int], scale: float,
                       feature: HaarFeature) -> float:
    check_window(ii, origin, scale, feature.window)
    right, bottom = feature_extent(feature, scale)
    if origin[0] + right > ii.width or origin[1] + bottom > ii.height:
        raise BoundsError(f"Scaled {feature.kind} feature at {origin} leaves the {ii.width}x{ii.height} image")
    xs, ys = np.array([origin[0]]), np.array([origin[1]])
    return float(feature_values(ii.table, xs, ys, scale, feature)[0])


def eval_weak_classifier(ii: IntegralImage, window_origin: Tuple[int, int], scale: float,
                         wc: WeakClassifier) -> int:
    """1 iff p * f < p * theta."""
    f = haar_feature_value(ii, window_origin, scale, wc.feature)
    return int(wc.parity * f < wc.parity * wc.threshold)


def weak_votes(table: np.ndarray, xs: np.ndarray, ys: np.ndarray, scale: float,
               wc: WeakClassifier) -> np.ndarray:
    f = feature_values(table, xs, ys, scale, wc.feature)
    return (wc.parity * f < wc.parity * wc.threshold).astype(float)


def lbp_code(img, n: int, m: int) -> int:
    """
    8-bit LBP code at row n, column m. Bit 7 is the top-left neighbor, then
    clockwise; a bit is set when the neighbor is >= the center.
    """
    pixels = _pixels(img)
    height, width = pixels.shape
    if not (1 <= n <= height - 2 and 1 <= m <= width - 2):
        raise BoundsError(f"Pixel ({n}, {m}) has no full 3x3 neighborhood in a {width}x{height} image")
    center = int(pixels[n, m])
    code = 0
    for dx, dy in LBP_NEIGHBORS:
        code = (code << 1) | int(int(pixels[n + dy, m + dx]) >= center)
    return code


def lbp_code_map(img) -> np.ndarray:
    """Codes for every interior pixel, shape (height - 2, width - 2)."""
    pixels = _pixels(img).astype(np.int64)
    height, width = pixels.shape
    if height < 3 or width < 3:
        raise BoundsError(f"LBP needs at least a 3x3 image, got {width}x{height}")
    center = pixels[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.int64)
    for dx, dy in LBP_NEIGHBORS:
        neighbor = pixels[1 + dy:height - 1 + dy, 1 + dx:width - 1 + dx]
        codes = (codes << 1) | (neighbor >= center)
    return codes


def lbp_uniformity(code: int) -> int:
    """Number of 0/1 transitions in the circular 8-bit pattern."""
    bits = [(int(code) >> i) & 1 for i in range(8)]
    return sum(bits[i] != bits[(i + 1) % 8] for i in range(8))


def block_lbp_codes(table: np.ndarray, xs: np.ndarray, ys: np.ndarray, scale: float,
                    position: LbpPosition) -> np.ndarray:
    """
    Multi-block LBP codes for many windows: the 3x3 grid of block sums at
    the scaled position, compared against the center block.
    """
    block = max(1, int(round(position.block * scale)))
    gx = xs + int(round(position.x * scale))
    gy = ys + int(round(position.y * scale))
    center = rect_sums(table, gx + block, gy + block, block, block)
    codes = np.zeros(np.shape(xs), dtype=np.int64)
    for dx, dy in LBP_NEIGHBORS:
        neighbor = rect_sums(table, gx + (1 + dx) * block, gy + (1 + dy) * block, block, block)
        codes = (codes << 1) | (neighbor >= center)
    return codes


def lbp_position_extent(position: LbpPosition, scale: float) -> Tuple[int, int]:
    block = max(1, int(round(position.block * scale)))
    return (int(round(position.x * scale)) + 3 * block, int(round(position.y * scale)) + 3 * block)


def lbp_window_codes(ii: IntegralImage, origin: Tuple[int, int], scale: float, stage: LbpStage,
                     window: Tuple[int, int] = BASE_WINDOW) -> List[int]:
    """Observed code at each position of an LBP stage for one window."""
    check_window(ii, origin, scale, window)
    for position in stage.positions:
        right, bottom = lbp_position_extent(position, scale)
        if origin[0] + right > ii.width or origin[1] + bottom > ii.height:
            raise BoundsError(f"LBP position ({position.x}, {position.y}) leaves the image at scale {scale:.3f}")
    xs, ys = np.array([origin[0]]), np.array([origin[1]])
    return [int(block_lbp_codes(ii.table, xs, ys, scale, pos)[0]) for pos in stage.positions]


def lbp_stage_score(codes: Sequence[int], stage: LbpStage) -> float:
    """H(X) = sum over positions of the position's table value at its observed code."""
    if len(codes) != len(stage.positions):
        raise BoundsError(f"Stage has {len(stage.positions)} positions but {len(codes)} codes were given")
    score = 0.0
    for code, position in zip(codes, stage.positions):
        if not 0 <= int(code) <= 255:
            raise BoundsError(f"LBP code {code} outside 0..255")
        score += float(position.table[int(code)])
    return score
