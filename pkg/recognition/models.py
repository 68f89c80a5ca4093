"""
Face datasets, trained recognition models and recognition results.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

UNKNOWN = 'UNKNOWN'


class RecognitionError(Exception):
    """Base exception for face recognition errors."""
    pass


class InvalidTrainingError(RecognitionError, ValueError):
    pass


class SingularScatterError(RecognitionError, ValueError):
    pass


class DegenerateModelError(RecognitionError, ValueError):
    pass


class PreprocessingError(RecognitionError):
    """Raised when a face cannot be normalized; callers skip the face."""
    pass


class InvalidGridError(RecognitionError, ValueError):
    pass


class NoModelError(RecognitionError):
    pass


class FaceShapeError(RecognitionError, ValueError):
    pass


class ModelFormatError(RecognitionError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FaceDataset:
    """R canonical N x N images with dense class ids 0..C-1."""
    images: np.ndarray  # (R, N, N) float
    labels: np.ndarray  # (R,) int
    class_names: Tuple[str, ...]

    def __post_init__(self):
        images = np.asarray(self.images, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 3 or images.shape[0] == 0:
            raise InvalidTrainingError(f"Dataset needs a non-empty (R, H, W) image stack, got shape {images.shape}")
        if labels.shape != (images.shape[0],):
            raise InvalidTrainingError(f"Expected {images.shape[0]} labels, got {labels.shape[0]}")
        classes = len(self.class_names)
        if classes == 0 or set(labels.tolist()) != set(range(classes)):
            raise InvalidTrainingError('Labels must densely cover 0..C-1 with at least one image per class')
        object.__setattr__(self, 'images', images)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'class_names', tuple(self.class_names))

    @classmethod
    def from_images(cls, images: Sequence, names: Sequence[str]) -> 'FaceDataset':
        """Build from per-image identity names; ids follow sorted name order."""
        if len(images) == 0:
            raise InvalidTrainingError('Dataset is empty')
        class_names = tuple(sorted(set(names)))
        index = {name: i for i, name in enumerate(class_names)}
        stack = np.stack([getattr(img, 'pixels', img) for img in images]).astype(float)
        return cls(images=stack, labels=np.array([index[n] for n in names]), class_names=class_names)

    @property
    def size(self) -> int:
        return self.images.shape[0]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def image_shape(self) -> Tuple[int, int]:
        return self.images.shape[1:]

    def vectors(self) -> np.ndarray:
        return self.images.reshape(self.size, -1)

    def subset(self, indices) -> 'FaceDataset':
        """Subset that keeps the original class ids; every class must stay present."""
        indices = np.asarray(indices, dtype=np.int64)
        return FaceDataset(images=self.images[indices], labels=self.labels[indices], class_names=self.class_names)


@dataclass(frozen=True, eq=False)
class EigenModel:
    mean: np.ndarray  # (D,)
    eigenfaces: np.ndarray  # (E, D), orthonormal rows
    eigenvalues: np.ndarray  # (E,), non-increasing
    gallery: np.ndarray  # (R, E) weight vectors
    gallery_labels: np.ndarray
    class_names: Tuple[str, ...]
    image_shape: Tuple[int, int]
    unknown_threshold: float = math.inf
    dropped_leading: int = 0

    kind = 'eigen'

    @property
    def components(self) -> int:
        return self.eigenfaces.shape[0]


@dataclass(frozen=True, eq=False)
class FisherModel:
    mean: np.ndarray  # (D,)
    projection: np.ndarray  # W_opt, (m, D) with m <= C - 1
    class_means: np.ndarray  # (C, m), projected
    gallery: np.ndarray  # (R, m)
    gallery_labels: np.ndarray
    class_names: Tuple[str, ...]
    image_shape: Tuple[int, int]
    unknown_threshold: float = math.inf

    kind = 'fisher'

    @property
    def components(self) -> int:
        return self.projection.shape[0]


@dataclass(frozen=True, eq=False)
class LbphModel:
    neighbors: int
    radius: float
    grid: Tuple[int, int]  # (cells across, cells down)
    gallery: np.ndarray  # (R, cells * bins) histograms
    gallery_labels: np.ndarray
    class_names: Tuple[str, ...]
    image_shape: Tuple[int, int]
    unknown_threshold: float = math.inf
    uniform: bool = False
    interpolation: str = 'nearest'
    block_size: int = 1

    kind = 'lbph'


@dataclass(frozen=True)
class RecognitionResult:
    label: str  # identity name or UNKNOWN
    distance: float
    position: Optional[Tuple[float, float, float, float]] = None
    nearest_label: Optional[str] = None

    @property
    def is_unknown(self) -> bool:
        return self.label == UNKNOWN

    @property
    def center(self) -> Optional[Tuple[float, float]]:
        if self.position is None:
            return None
        x, y, w, h = self.position
        return (x + w / 2.0, y + h / 2.0)
