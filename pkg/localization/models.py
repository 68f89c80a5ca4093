"""
Types for GCC functions, steering grids and steered response power maps.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np


class LocalizationError(Exception):
    """Base exception for beamforming errors."""
    pass


class ShapeError(LocalizationError, ValueError):
    """Raised when signal, channel or array dimensions do not agree."""
    pass


class SteeringGridError(LocalizationError, ValueError):
    """Raised for degenerate steering planes."""
    pass


class Weighting(str, Enum):
    PHAT = 'phat'
    CONST = 'const'


class MapMode(str, Enum):
    SRP_PHAT = 'SRP_PHAT'
    SRP_CONST = 'SRP_CONST'

    @classmethod
    def for_weighting(cls, weighting: Weighting) -> 'MapMode':
        return cls.SRP_PHAT if Weighting(weighting) is Weighting.PHAT else cls.SRP_CONST


@dataclass(frozen=True, eq=False)
class GccFunction:
    """Cross-correlation values over contiguous integer lags."""
    lags: np.ndarray
    values: np.ndarray

    def value_at(self, lag: int) -> float:
        index = int(lag) - int(self.lags[0])
        if not 0 <= index < self.lags.size:
            raise ShapeError(f"Lag {lag} outside [{self.lags[0]}, {self.lags[-1]}]")
        return float(self.values[index])

    @property
    def peak_lag(self) -> int:
        return int(self.lags[int(np.argmax(self.values))])


@dataclass(frozen=True, eq=False)
class SteeringGrid:
    """
    Planar grid of candidate source points. ``origin`` is a corner of the
    plane; ``u_axis`` and ``v_axis`` span its full extent. Cell (i, j) has its
    center at origin + (i + 0.5)/n_u * u_axis + (j + 0.5)/n_v * v_axis.
    """
    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    n_u: int
    n_v: int

    def __post_init__(self):
        for name in ('origin', 'u_axis', 'v_axis'):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (3,) or not np.all(np.isfinite(value)):
                raise SteeringGridError(f"Steering grid {name} must be a finite 3-vector")
            object.__setattr__(self, name, value)
        if int(self.n_u) < 1 or int(self.n_v) < 1:
            raise SteeringGridError(f"Steering grid needs at least one cell per axis, got {self.n_u}x{self.n_v}")
        object.__setattr__(self, 'n_u', int(self.n_u))
        object.__setattr__(self, 'n_v', int(self.n_v))
        cross = np.linalg.norm(np.cross(self.u_axis, self.v_axis))
        if cross <= 1e-12 * np.linalg.norm(self.u_axis) * np.linalg.norm(self.v_axis) or cross == 0:
            raise SteeringGridError('Steering grid axes must be non-zero and non-parallel')

    @classmethod
    def plane(cls, distance: float = 2.0, half_width: float = 1.5, half_height: float = 1.125,
              n_u: int = 64, n_v: int = 48) -> 'SteeringGrid':
        """
        Plane parallel to the array at z = distance. Cell (0, 0) is the
        top-left of the camera view: u runs along +x, v along -y.
        """
        return cls(
            origin=np.array([-half_width, half_height, distance]),
            u_axis=np.array([2.0 * half_width, 0.0, 0.0]),
            v_axis=np.array([0.0, -2.0 * half_height, 0.0]),
            n_u=n_u,
            n_v=n_v,
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_u, self.n_v)

    def cell_center(self, i: int, j: int) -> np.ndarray:
        return self.origin + (i + 0.5) / self.n_u * self.u_axis + (j + 0.5) / self.n_v * self.v_axis

    def cell_centers(self) -> np.ndarray:
        """All cell centers, shape (n_u, n_v, 3)."""
        a = (np.arange(self.n_u) + 0.5) / self.n_u
        b = (np.arange(self.n_v) + 0.5) / self.n_v
        return (self.origin[None, None, :]
                + a[:, None, None] * self.u_axis[None, None, :]
                + b[None, :, None] * self.v_axis[None, None, :])

    def plane_coordinates(self, point) -> Tuple[float, float]:
        """Fractional (a, b) with point ~ origin + a * u_axis + b * v_axis."""
        basis = np.column_stack([self.u_axis, self.v_axis])
        coeffs, *_ = np.linalg.lstsq(basis, np.asarray(point, dtype=float) - self.origin, rcond=None)
        return (float(coeffs[0]), float(coeffs[1]))

    def point_at(self, a: float, b: float) -> np.ndarray:
        return self.origin + a * self.u_axis + b * self.v_axis

    def cell_of(self, point) -> Tuple[float, float]:
        """Fractional cell index (i, j) of the projection of a point."""
        a, b = self.plane_coordinates(point)
        return (a * self.n_u - 0.5, b * self.n_v - 0.5)


@dataclass(frozen=True, eq=False)
class SteeredPowerMap:
    grid: SteeringGrid
    power: np.ndarray  # (n_u, n_v)
    mode_used: MapMode

    def __post_init__(self):
        power = np.asarray(self.power, dtype=float)
        if power.shape != self.grid.shape:
            raise ShapeError(f"Power map shape {power.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, 'power', power)


@dataclass(frozen=True)
class MapPeak:
    cell: Tuple[int, int]
    power: float

    @property
    def i(self) -> int:
        return self.cell[0]

    @property
    def j(self) -> int:
        return self.cell[1]


def cell_distance(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


