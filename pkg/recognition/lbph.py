"""
Circular local binary patterns LBP_{P,R} and gridded LBP histograms (LBPH).

Sample p sits at angle 2*pi*p/P counter-clockwise from the right of the
center pixel and contributes bit p when its value is >= the center value.

Samples are read from the nearest pixel by default, so codes and histograms
only depend on the pixel ordering and survive any strictly increasing tone
map. Bilinear sampling blends neighbors and loses that property.
"""
import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.ndimage import uniform_filter

from .models import FaceDataset, FaceShapeError, InvalidGridError, InvalidTrainingError, LbphModel

logger = logging.getLogger(__name__)

DEFAULT_NEIGHBORS = 8
DEFAULT_RADIUS = 1.0
DEFAULT_GRID = (8, 8)
MIN_CELL = 3
INTERPOLATIONS = ('bilinear', 'nearest')
OFFSET_DECIMALS = 9


def sample_offsets(neighbors: int, radius: float) -> np.ndarray:
    """(dx, dy) per sample point, snapped so axis-aligned samples land on pixels."""
    angles = 2.0 * np.pi * np.arange(neighbors) / neighbors
    offsets = np.stack([radius * np.cos(angles), -radius * np.sin(angles)], axis=1)
    return np.round(offsets, OFFSET_DECIMALS) + 0.0


def _block_offsets(block: int) -> np.ndarray:
    unit = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)]
    return np.array(unit, dtype=float) * block


def _margin(neighbors: int, radius: float, block_size: int) -> int:
    if block_size > 1:
        return block_size + block_size // 2
    return int(np.ceil(radius - 10.0 ** -OFFSET_DECIMALS))


def _check_params(neighbors: int, radius: float, interpolation: str, block_size: int):
    if neighbors < 1 or neighbors > 24:
        raise InvalidTrainingError(f"LBP neighbor count must be in 1..24, got {neighbors}")
    if radius <= 0:
        raise InvalidTrainingError(f"LBP radius must be positive, got {radius}")
    if interpolation not in INTERPOLATIONS:
        raise InvalidTrainingError(f"Unknown interpolation '{interpolation}', expected one of {INTERPOLATIONS}")
    if block_size < 1:
        raise InvalidTrainingError(f"Block size must be at least 1, got {block_size}")
    if block_size > 1 and neighbors != 8:
        raise InvalidTrainingError('Multi-block LBP uses exactly 8 neighbors')


def _sample(padded: np.ndarray, rows: np.ndarray, cols: np.ndarray, dx: float, dy: float,
            interpolation: str) -> np.ndarray:
    y = rows + dy
    x = cols + dx
    if interpolation == 'nearest':
        return padded[np.rint(y).astype(int), np.rint(x).astype(int)]
    y0 = np.floor(y).astype(int)
    x0 = np.floor(x).astype(int)
    fy = y - y0
    fx = x - x0
    p00 = padded[y0, x0]
    p01 = padded[y0, x0 + 1]
    p10 = padded[y0 + 1, x0]
    p11 = padded[y0 + 1, x0 + 1]
    top = p00 + fx * (p01 - p00)
    bottom = p10 + fx * (p11 - p10)
    return top + fy * (bottom - top)


def lbp_codes(img, neighbors: int = DEFAULT_NEIGHBORS, radius: float = DEFAULT_RADIUS,
              interpolation: str = 'nearest', block_size: int = 1) -> np.ndarray:
    """Code map over the interior region where every sample stays inside the image."""
    _check_params(neighbors, radius, interpolation, block_size)
    pixels = np.asarray(getattr(img, 'pixels', img), dtype=float)
    margin = _margin(neighbors, radius, block_size)
    height, width = pixels.shape
    if height <= 2 * margin or width <= 2 * margin:
        raise FaceShapeError(f"Image {width}x{height} is too small for LBP radius {radius}")

    if block_size > 1:
        pixels = uniform_filter(pixels, size=block_size, mode='nearest')
        offsets = _block_offsets(block_size)
    else:
        offsets = sample_offsets(neighbors, radius)

    padded = np.pad(pixels, 1, mode='edge')
    rows, cols = np.mgrid[margin:height - margin, margin:width - margin]
    rows = rows + 1
    cols = cols + 1
    center = padded[rows, cols]
    codes = np.zeros(center.shape, dtype=np.int64)
    for bit, (dx, dy) in enumerate(offsets):
        codes |= (_sample(padded, rows, cols, dx, dy, interpolation) >= center).astype(np.int64) << bit
    return codes


def transitions(code: int, neighbors: int) -> int:
    bits = [(code >> i) & 1 for i in range(neighbors)]
    return sum(bits[i] != bits[(i + 1) % neighbors] for i in range(neighbors))


@lru_cache(maxsize=None)
def uniform_mapping(neighbors: int) -> np.ndarray:
    """Code -> bin: uniform patterns get their own bins in code order, the rest share the last."""
    mapping = np.empty(1 << neighbors, dtype=np.int64)
    next_bin = 0
    for code in range(1 << neighbors):
        if transitions(code, neighbors) <= 2:
            mapping[code] = next_bin
            next_bin += 1
        else:
            mapping[code] = -1
    mapping[mapping < 0] = next_bin
    mapping.setflags(write=False)
    return mapping


def bin_count(neighbors: int, uniform: bool) -> int:
    return neighbors * (neighbors - 1) + 3 if uniform else 1 << neighbors


def grid_cells(shape: Tuple[int, int], grid: Tuple[int, int]):
    """Row and column index blocks of a (cells across, cells down) grid."""
    cells_x, cells_y = grid
    if cells_x < 1 or cells_y < 1:
        raise InvalidGridError(f"Grid must have at least 1x1 cells, got {grid}")
    row_blocks = np.array_split(np.arange(shape[0]), cells_y)
    col_blocks = np.array_split(np.arange(shape[1]), cells_x)
    smallest = (min(len(b) for b in row_blocks), min(len(b) for b in col_blocks))
    if min(smallest) < MIN_CELL:
        raise InvalidGridError(
            f"Grid {cells_x}x{cells_y} over a {shape[1]}x{shape[0]} code map gives "
            f"{smallest[1]}x{smallest[0]} cells; cells must be at least {MIN_CELL}x{MIN_CELL}"
        )
    return row_blocks, col_blocks


def lbph_descriptor(img, neighbors: int = DEFAULT_NEIGHBORS, radius: float = DEFAULT_RADIUS,
                    grid: Tuple[int, int] = DEFAULT_GRID, uniform: bool = False,
                    interpolation: str = 'nearest', block_size: int = 1) -> np.ndarray:
    """Concatenated per-cell code histograms, cells in row-major order."""
    codes = lbp_codes(img, neighbors, radius, interpolation, block_size)
    bins = bin_count(neighbors, uniform)
    if uniform:
        codes = uniform_mapping(neighbors)[codes]
    row_blocks, col_blocks = grid_cells(codes.shape, grid)
    histograms = [
        np.bincount(codes[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1].ravel(), minlength=bins)
        for rows in row_blocks for cols in col_blocks
    ]
    return np.concatenate(histograms).astype(float)


def model_descriptor(model: LbphModel, img) -> np.ndarray:
    pixels = np.asarray(getattr(img, 'pixels', img))
    if pixels.shape != tuple(model.image_shape):
        raise FaceShapeError(f"Image shape {pixels.shape} does not match model shape {tuple(model.image_shape)}")
    return lbph_descriptor(pixels, model.neighbors, model.radius, model.grid, model.uniform,
                           model.interpolation, model.block_size)


def train_lbph(data: FaceDataset, neighbors: int = DEFAULT_NEIGHBORS, radius: float = DEFAULT_RADIUS,
               grid: Tuple[int, int] = DEFAULT_GRID, uniform: bool = False,
               interpolation: str = 'nearest', block_size: int = 1) -> LbphModel:
    height, width = data.image_shape
    if height <= 2 * radius or width <= 2 * radius:
        raise InvalidTrainingError(f"Images {width}x{height} must exceed twice the radius {radius}")
    gallery = np.stack([
        lbph_descriptor(image, neighbors, radius, grid, uniform, interpolation, block_size)
        for image in data.images
    ])
    logger.info(f"Trained LBPH: {data.size} images, P={neighbors}, R={radius}, grid {grid[0]}x{grid[1]}, "
                f"{gallery.shape[1]} histogram bins per face")
    return LbphModel(
        neighbors=neighbors,
        radius=float(radius),
        grid=(int(grid[0]), int(grid[1])),
        gallery=gallery,
        gallery_labels=data.labels.copy(),
        class_names=data.class_names,
        image_shape=tuple(data.image_shape),
        uniform=uniform,
        interpolation=interpolation,
        block_size=block_size,
    )
