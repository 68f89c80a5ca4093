"""
Synthetic labeled face datasets rendered from scene_sim sprites.
"""
import logging
from typing import List, Sequence, Tuple

import numpy as np

from scene_sim.models import FaceSprite, GrayImage, SceneDescription
from scene_sim.sprites import render_synthetic_frame

from .models import FaceDataset, InvalidTrainingError, PreprocessingError
from .preprocessing import CANONICAL_SIZE, preprocess_face

logger = logging.getLogger(__name__)

CANVAS_SIZE = 128
MAX_ROTATION = 8.0
SCALE_RANGE = (0.9, 1.1)
MAX_BRIGHTNESS_SHIFT = 20.0
MAX_JITTER = 2.0
EXTRA_NOISE = 3.0
DEFAULT_IDENTITIES = ('alice', 'bob', 'carol')


def render_face(identity: str, rng: np.random.Generator, augment: bool, seed: int) -> Tuple[GrayImage, tuple]:
    """One sprite on a small canvas; returns the image and the ground-truth face box."""
    rotation, scale, shift, jitter = 0.0, 1.0, 0.0, (0.0, 0.0)
    if augment:
        rotation = float(rng.uniform(-MAX_ROTATION, MAX_ROTATION))
        scale = float(rng.uniform(*SCALE_RANGE))
        shift = float(rng.uniform(-MAX_BRIGHTNESS_SHIFT, MAX_BRIGHTNESS_SHIFT))
        jitter = tuple(rng.uniform(-MAX_JITTER, MAX_JITTER, size=2))
    center = CANVAS_SIZE / 2.0
    sprite = FaceSprite(identity=identity, x=center + jitter[0], y=center + jitter[1],
                        scale=scale, rotation=rotation)
    frame = render_synthetic_frame(SceneDescription(face_sprites=(sprite,), seed=seed), CANVAS_SIZE, CANVAS_SIZE)
    pixels = frame.image.pixels.astype(float) + shift
    if augment:
        pixels += EXTRA_NOISE * rng.standard_normal(pixels.shape)
    return GrayImage(pixels), frame.sprites[0].box


def synthesize_face_dataset(identities: Sequence[str] = DEFAULT_IDENTITIES, images_per_identity: int = 10,
                            seed: int = 0, augment: bool = True, size: int = CANONICAL_SIZE) -> FaceDataset:
    """
    Render, then preprocess, `images_per_identity` faces per identity. The
    first image of each identity is unaugmented; faces whose eyes cannot be
    found are skipped.
    """
    if not identities:
        raise InvalidTrainingError('At least one identity is needed')
    if len(set(identities)) != len(identities):
        raise InvalidTrainingError(f"Identities must be distinct, got {list(identities)}")
    if images_per_identity < 1:
        raise InvalidTrainingError(f"Need at least one image per identity, got {images_per_identity}")

    images: List[np.ndarray] = []
    labels: List[int] = []
    for class_id, identity in enumerate(identities):
        for index in range(images_per_identity):
            rng = np.random.default_rng([int(seed), class_id, index])
            render_seed = int(rng.integers(0, 2 ** 31))
            image, box = render_face(identity, rng, augment and index > 0, render_seed)
            try:
                face = preprocess_face(image, box, size=size)
            except PreprocessingError as e:
                logger.warning(f"Skipping synthetic face {identity}#{index}: {e}")
                continue
            images.append(face.pixels)
            labels.append(class_id)

    missing = sorted(set(range(len(identities))) - set(labels))
    if missing:
        raise InvalidTrainingError(f"No usable faces for {[identities[i] for i in missing]}")
    logger.info(f"Synthesized face dataset: {len(identities)} identities, {len(images)} images, seed {seed}")
    return FaceDataset(images=np.stack(images).astype(float), labels=np.array(labels), class_names=tuple(identities))


def split_per_class(data: FaceDataset, train_per_class: int, seed: int = 0) -> Tuple[FaceDataset, FaceDataset]:
    """Seeded split taking `train_per_class` images of every class for training."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for class_id in range(data.class_count):
        members = rng.permutation(np.flatnonzero(data.labels == class_id))
        if members.size <= train_per_class:
            raise InvalidTrainingError(
                f"Class '{data.class_names[class_id]}' has {members.size} images, "
                f"need more than {train_per_class} to hold some out"
            )
        train.extend(members[:train_per_class].tolist())
        test.extend(members[train_per_class:].tolist())
    return data.subset(sorted(train)), data.subset(sorted(test))
