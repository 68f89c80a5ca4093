"""
Eigenface (PCA) and Fisherface (PCA + LDA) subspace models.

Both start from the R x R inner-product matrix of the mean-centered faces
instead of the D x D covariance, so training cost depends on the number of
images and not on the number of pixels.
"""
import logging
from typing import Optional, Tuple, Union

import numpy as np

from .linalg import inverse_sqrt, jacobi_eigh
from .models import (
    EigenModel, FaceDataset, FaceShapeError, FisherModel, DegenerateModelError,
    InvalidTrainingError, SingularScatterError,
)

logger = logging.getLogger(__name__)

DEFAULT_COMPONENTS = 30
RANK_TOLERANCE = 1e-9
SCATTER_TOLERANCE = 1e-10

SubspaceModel = Union[EigenModel, FisherModel]


def _orthonormalize(rows: np.ndarray) -> np.ndarray:
    """Gram-Schmidt (via QR) keeping order and orientation of nearly orthonormal rows."""
    if rows.shape[0] == 0:
        return rows
    q, r = np.linalg.qr(rows.T)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return (q * signs).T


def principal_axes(centered: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unit-length principal directions (rows) and the matching eigenvalues of
    A A^T for mean-centered rows A, largest first, rank-truncated.
    """
    inner = centered @ centered.T
    values, vectors = jacobi_eigh(inner)
    top = values[0] if values.size else 0.0
    if top <= 0:
        return np.zeros((0, centered.shape[1])), np.zeros(0)
    keep = values > RANK_TOLERANCE * top
    values, vectors = values[keep], vectors[:, keep]
    axes = vectors.T @ centered
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return _orthonormalize(axes), values


def train_eigenfaces(data: FaceDataset, components: int = DEFAULT_COMPONENTS,
                     drop_leading: int = 0) -> EigenModel:
    """Keep the top min(components, rank) eigenfaces, optionally skipping the first few."""
    if data.size < 2:
        raise InvalidTrainingError(f"Eigenfaces need at least 2 images, got {data.size}")
    if components < 1:
        raise InvalidTrainingError(f"Component count must be at least 1, got {components}")
    if drop_leading < 0:
        raise InvalidTrainingError(f"Cannot drop {drop_leading} leading components")

    vectors = data.vectors()
    mean = vectors.mean(axis=0)
    centered = vectors - mean
    axes, values = principal_axes(centered)
    rank = axes.shape[0]
    if drop_leading >= rank and rank > 0:
        raise InvalidTrainingError(f"Dropping {drop_leading} leading components leaves none of rank {rank}")

    axes = axes[drop_leading:drop_leading + components]
    values = values[drop_leading:drop_leading + components] / data.size
    logger.info(f"Trained eigenfaces: {data.size} images, {data.class_count} classes, "
                f"rank {rank}, kept {axes.shape[0]} component(s)")
    return EigenModel(
        mean=mean,
        eigenfaces=axes,
        eigenvalues=values,
        gallery=centered @ axes.T,
        gallery_labels=data.labels.copy(),
        class_names=data.class_names,
        image_shape=tuple(data.image_shape),
        dropped_leading=drop_leading,
    )


def _basis(model: SubspaceModel) -> np.ndarray:
    return model.eigenfaces if isinstance(model, EigenModel) else model.projection


def face_vector(model, img) -> np.ndarray:
    pixels = np.asarray(getattr(img, 'pixels', img), dtype=float)
    expected = int(np.prod(model.image_shape))
    if pixels.size != expected or (pixels.ndim == 2 and pixels.shape != tuple(model.image_shape)):
        raise FaceShapeError(f"Image shape {pixels.shape} does not match model shape {tuple(model.image_shape)}")
    return pixels.reshape(-1)


def project(model: SubspaceModel, img) -> np.ndarray:
    """Weight vector of an image in the model subspace."""
    return _basis(model) @ (face_vector(model, img) - model.mean)


def reconstruct(model: EigenModel, omega) -> np.ndarray:
    """Mean plus the weighted eigenfaces, as a flat pixel vector."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.size > model.components:
        raise FaceShapeError(f"Got {omega.size} weights for a model with {model.components} components")
    return model.mean + omega @ model.eigenfaces[:omega.size]


def reconstruction_error(model: EigenModel, img, components: Optional[int] = None) -> float:
    vector = face_vector(model, img)
    omega = project(model, img)[:components]
    return float(np.linalg.norm(vector - reconstruct(model, omega)))


def scatter_matrices(samples: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Between-class and within-class scatter of row samples."""
    mean = samples.mean(axis=0)
    dim = samples.shape[1]
    between = np.zeros((dim, dim))
    within = np.zeros((dim, dim))
    for label in np.unique(labels):
        members = samples[labels == label]
        class_mean = members.mean(axis=0)
        offset = class_mean - mean
        between += members.shape[0] * np.outer(offset, offset)
        spread = members - class_mean
        within += spread.T @ spread
    return between, within


def train_fisherfaces(data: FaceDataset, components: Optional[int] = None) -> FisherModel:
    """
    PCA down to R - C dimensions, then the C - 1 most discriminant directions
    of the whitened between-class scatter. Requesting more than C - 1
    components changes nothing.
    """
    classes = data.class_count
    if classes < 2:
        raise InvalidTrainingError(f"Fisherfaces need at least 2 classes, got {classes}")
    if data.size < classes + 1:
        raise InvalidTrainingError(f"Fisherfaces need at least C + 1 = {classes + 1} images, got {data.size}")
    if components is not None and components < 1:
        raise InvalidTrainingError(f"Component count must be at least 1, got {components}")

    vectors = data.vectors()
    mean = vectors.mean(axis=0)
    centered = vectors - mean
    labels = data.labels

    class_means = np.stack([vectors[labels == c].mean(axis=0) for c in range(classes)])
    spread = np.linalg.norm(class_means - mean, axis=1).max()
    if spread <= RANK_TOLERANCE * max(1.0, float(np.abs(centered).max(initial=0.0))):
        raise DegenerateModelError('All class means are equal; between-class scatter vanishes')

    pca_axes, _ = principal_axes(centered)
    reduced_dim = min(data.size - classes, pca_axes.shape[0])
    pca_axes = pca_axes[:reduced_dim]
    reduced = centered @ pca_axes.T

    between, within = scatter_matrices(reduced, labels)
    whitening, within_values = inverse_sqrt(
        within, floor=SCATTER_TOLERANCE * max(float(np.abs(within).max(initial=0.0)), 1e-300)
    )
    if whitening is None:
        raise SingularScatterError(
            f"Within-class scatter is singular in the {reduced_dim}-dimensional PCA space "
            f"(smallest eigenvalue {within_values[-1]:.3e}); add more distinct images per class"
        )

    values, vectors_fld = jacobi_eigh(whitening @ between @ whitening)
    wanted = classes - 1 if components is None else min(components, classes - 1)
    positive = int(np.sum(values > SCATTER_TOLERANCE * max(values[0], 0.0))) if values[0] > 0 else 0
    kept = min(wanted, positive)
    if kept == 0:
        raise DegenerateModelError('Between-class scatter has no discriminant direction')

    fld = (whitening @ vectors_fld[:, :kept]).T
    fld /= np.linalg.norm(fld, axis=1, keepdims=True)
    projection = fld @ pca_axes
    logger.info(f"Trained fisherfaces: {data.size} images, {classes} classes, "
                f"PCA dimension {reduced_dim}, kept {kept} component(s)")
    return FisherModel(
        mean=mean,
        projection=projection,
        class_means=(class_means - mean) @ projection.T,
        gallery=centered @ projection.T,
        gallery_labels=labels.copy(),
        class_names=data.class_names,
        image_shape=tuple(data.image_shape),
    )
