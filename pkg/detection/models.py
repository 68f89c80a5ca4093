"""
Types for cascade face detection.
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

BASE_WINDOW = (24, 24)


class DetectionError(Exception):
    """Base exception for detection errors."""
    pass


class BoundsError(DetectionError, ValueError):
    """Raised when a rectangle, window or neighborhood leaves the image."""
    pass


class CascadeFormatError(DetectionError, ValueError):
    """Raised for malformed cascade models or cascade files."""
    pass


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """(height+1) x (width+1) int64 table; first row and column are zero."""
    table: np.ndarray

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1


@dataclass(frozen=True, slots=True)
class HaarRect:
    x: int
    y: int
    w: int
    h: int
    weight: int


@dataclass(frozen=True, slots=True)
class HaarFeature:
    kind: str  # two_h, two_v, three_h, three_v, four, or custom
    rects: Tuple[HaarRect, ...]
    window: Tuple[int, int] = BASE_WINDOW

    def __post_init__(self):
        ww, wh = self.window
        for r in self.rects:
            if r.w <= 0 or r.h <= 0 or r.x < 0 or r.y < 0 or r.x + r.w > ww or r.y + r.h > wh:
                raise CascadeFormatError(f"Rect {r} of {self.kind} feature leaves the {ww}x{wh} window")
        if sum(r.weight * r.w * r.h for r in self.rects) != 0:
            raise CascadeFormatError(f"{self.kind} feature weights are not area balanced")


@dataclass(frozen=True)
class WeakClassifier:
    feature: HaarFeature
    threshold: float
    parity: int = 1
    alpha: float = 1.0

    def __post_init__(self):
        if self.parity not in (-1, 1):
            raise CascadeFormatError(f"Parity must be -1 or +1, got {self.parity}")


@dataclass(frozen=True)
class HaarStage:
    weak_classifiers: Tuple[WeakClassifier, ...]
    threshold: float


@dataclass(frozen=True, eq=False)
class LbpPosition:
    """
    3x3 grid of block x block cells with its top-left corner at (x, y) in the
    base window; ``table`` maps each of the 256 codes to a score.
    """
    x: int
    y: int
    table: np.ndarray
    block: int = 1

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.shape != (256,):
            raise CascadeFormatError(f"LBP table must hold 256 values, got shape {table.shape}")
        if self.block < 1:
            raise CascadeFormatError(f"LBP block size must be >= 1, got {self.block}")
        object.__setattr__(self, 'table', table)

    @property
    def span(self) -> int:
        return 3 * self.block


@dataclass(frozen=True)
class LbpStage:
    positions: Tuple[LbpPosition, ...]
    threshold: float


Stage = Union[HaarStage, LbpStage]


@dataclass(frozen=True)
class CascadeModel:
    stages: Tuple[Stage, ...] = ()
    base_window: Tuple[int, int] = BASE_WINDOW
    name: str = 'cascade'
    version: int = 1

    def __post_init__(self):
        ww, wh = self.base_window
        for index, stage in enumerate(self.stages):
            if isinstance(stage, HaarStage):
                for wc in stage.weak_classifiers:
                    fw, fh = wc.feature.window
                    if fw > ww or fh > wh:
                        raise CascadeFormatError(f"Stage {index} feature window exceeds the base window")
            else:
                for pos in stage.positions:
                    if pos.x < 0 or pos.y < 0 or pos.x + pos.span > ww or pos.y + pos.span > wh:
                        raise CascadeFormatError(f"Stage {index} LBP position ({pos.x}, {pos.y}) leaves the base window")


@dataclass(frozen=True)
class CascadeVerdict:
    accepted: bool
    rejected_stage: Optional[int]
    stages_evaluated: int


@dataclass(frozen=True)
class Detection:
    x: float
    y: float
    w: float
    h: float
    score: float = 0.0
    neighbor_count: int = 1

    @property
    def box(self) -> Tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def to_record(self) -> dict:
        return {
            'x': round(self.x, 3),
            'y': round(self.y, 3),
            'w': round(self.w, 3),
            'h': round(self.h, 3),
            'score': round(self.score, 6),
            'neighbors': self.neighbor_count,
        }
