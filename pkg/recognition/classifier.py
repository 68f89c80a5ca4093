"""
k-nearest-neighbor decision over a model gallery with an unknown threshold.
"""
import logging
import math
from dataclasses import replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .lbph import model_descriptor
from .models import LbphModel, NoModelError, RecognitionResult, UNKNOWN
from .subspace import project

logger = logging.getLogger(__name__)

DEFAULT_K = 1
THRESHOLD_SIGMAS = 2.0


def euclidean_distances(gallery: np.ndarray, query: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((gallery - query) ** 2, axis=1))


def chi_square_distances(gallery: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Sum over bins of (a - b)^2 / (a + b), skipping bins empty in both."""
    total = gallery + query
    diff = (gallery - query) ** 2
    safe = np.where(total > 0, total, 1.0)
    return np.sum(np.where(total > 0, diff / safe, 0.0), axis=1)


def describe(model, img) -> np.ndarray:
    """Query representation comparable with the model gallery."""
    if isinstance(model, LbphModel):
        return model_descriptor(model, img)
    return project(model, img)


def gallery_distances(model, query: np.ndarray) -> np.ndarray:
    if isinstance(model, LbphModel):
        return chi_square_distances(model.gallery, query)
    return euclidean_distances(model.gallery, query)


def vote(distances: np.ndarray, labels: np.ndarray, k: int) -> Tuple[int, float]:
    """
    Majority label among the k nearest entries. Ties go to the label with the
    smaller mean distance, then to the smaller label id. Returns (label id,
    nearest distance overall).
    """
    order = np.lexsort((np.arange(distances.size), distances))[:k]
    nearest = labels[order]
    counts = {}
    for label, distance in zip(nearest.tolist(), distances[order].tolist()):
        count, total = counts.get(label, (0, 0.0))
        counts[label] = (count + 1, total + distance)
    winner = min(counts, key=lambda label: (-counts[label][0], counts[label][1] / counts[label][0], label))
    return int(winner), float(distances[order[0]])


def knn_classify(model, img, k: int = DEFAULT_K, unknown_threshold: Optional[float] = None,
                 position: Optional[Sequence[float]] = None) -> RecognitionResult:
    """
    Label an image by its k nearest gallery entries. The result is UNKNOWN
    when the nearest distance exceeds the threshold (the model's calibrated
    threshold when none is given).
    """
    if model is None or model.gallery.shape[0] == 0:
        raise NoModelError('Recognition model has an empty gallery')
    if k < 1 or k > model.gallery.shape[0]:
        raise ValueError(f"k must be in 1..{model.gallery.shape[0]}, got {k}")
    threshold = model.unknown_threshold if unknown_threshold is None else float(unknown_threshold)

    distances = gallery_distances(model, describe(model, img))
    label_id, nearest = vote(distances, model.gallery_labels, k)
    name = model.class_names[label_id]
    label = UNKNOWN if nearest > threshold else name
    box = tuple(float(v) for v in position) if position is not None else None
    logger.debug(f"kNN ({model.kind}, k={k}): nearest {name} at {nearest:.4g}, threshold {threshold:.4g} -> {label}")
    return RecognitionResult(label=label, distance=max(nearest, 0.0), position=box, nearest_label=name)


def calibrate_unknown_threshold(model, sigmas: float = THRESHOLD_SIGMAS) -> float:
    """
    Mean plus `sigmas` standard deviations of each gallery entry's distance to
    its nearest other entry. A single-entry gallery yields no bound (inf).
    """
    gallery = model.gallery
    if gallery.shape[0] < 2:
        return math.inf
    nearest = []
    for index in range(gallery.shape[0]):
        distances = gallery_distances(model, gallery[index])
        distances[index] = np.inf
        nearest.append(distances.min())
    nearest = np.array(nearest)
    return float(nearest.mean() + sigmas * nearest.std())


def with_threshold(model, threshold: float):
    """Copy of an immutable model carrying a new unknown threshold."""
    return replace(model, unknown_threshold=float(threshold))
