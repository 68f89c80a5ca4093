"""
Parameter sweeps that emit plain tab-separated tables for external plotting.
"""
import logging
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from localization.beamformer import combined_srp_map, find_peak
from localization.models import SteeringGrid, cell_distance
from recognition.classifier import knn_classify
from recognition.datasets import split_per_class, synthesize_face_dataset
from recognition.lbph import train_lbph
from recognition.models import (
    FaceDataset, InvalidTrainingError, SingularScatterError, DegenerateModelError,
)
from recognition.subspace import train_eigenfaces, train_fisherfaces
from scene_sim.geometry import build_double_ring_array
from scene_sim.models import SceneDescription, SourceSpec
from scene_sim.synthesis import frame_seed, synthesize_scene

from .models import ScenarioError

logger = logging.getLogger(__name__)

EXPERIMENT_IDENTITIES = ('alice', 'bob', 'carol', 'dave', 'erin')
COMPONENT_COUNTS = (1, 2, 3, 4, 5, 6, 8, 10, 15, 20, 30, 40)
TRAINING_COUNTS = (1, 2, 3, 4, 5, 6, 7, 8)
SNR_LEVELS = (0.0, 10.0, 20.0, 40.0)
TARGET_CELL = (40, 20)
NOT_AVAILABLE = 'n/a'

Table = Tuple[List[str], List[list]]


class UnknownExperimentError(ScenarioError, ValueError):
    pass


def accuracy(model, test: FaceDataset, k: int = 1) -> float:
    """Closed-set accuracy: every query gets its nearest label."""
    correct = 0
    for image, label in zip(test.images, test.labels):
        result = knn_classify(model, image, k, unknown_threshold=np.inf)
        correct += int(result.label == test.class_names[label])
    return correct / test.size


def truncated(model, components: int):
    """Subspace model restricted to its first `components` directions."""
    if hasattr(model, 'eigenfaces'):
        return replace(model, eigenfaces=model.eigenfaces[:components],
                       eigenvalues=model.eigenvalues[:components], gallery=model.gallery[:, :components])
    return replace(model, projection=model.projection[:components],
                   class_means=model.class_means[:, :components], gallery=model.gallery[:, :components])


def _median(values: Sequence[float]):
    return round(float(np.median(values)), 4) if values else NOT_AVAILABLE


def _datasets(seeds, classes: int, images: int):
    identities = EXPERIMENT_IDENTITIES[:classes]
    for seed in seeds:
        yield seed, synthesize_face_dataset(identities, images, seed=seed)


def accuracy_vs_components(params: dict) -> Table:
    """
    Eigen and Fisher accuracy as a function of the component count. Fisher
    uses min(E, C - 1) directions, so its column is flat beyond C - 1.
    """
    seeds = params.get('seeds', (0, 1, 2))
    counts = params.get('components', COMPONENT_COUNTS)
    classes = params.get('classes', 5)
    train_per_class = params.get('train_per_class', 8)
    images = params.get('images_per_identity', 10)

    eigen_scores: Dict[int, List[float]] = {count: [] for count in counts}
    fisher_scores: Dict[int, List[float]] = {count: [] for count in counts}
    for seed, data in _datasets(seeds, classes, images):
        train, test = split_per_class(data, train_per_class, seed)
        eigen = train_eigenfaces(train, max(counts))
        fisher = train_fisherfaces(train)
        for count in counts:
            eigen_scores[count].append(accuracy(truncated(eigen, count), test))
            fisher_scores[count].append(accuracy(truncated(fisher, count), test))
        logger.info(f"accuracy_vs_components: seed {seed} done")

    header = ['components', 'eigen_accuracy', 'fisher_accuracy', 'fisher_components']
    rows = [[count, _median(eigen_scores[count]), _median(fisher_scores[count]), min(count, classes - 1)]
            for count in counts]
    return header, rows


def accuracy_vs_training_images(params: dict) -> Table:
    """Accuracy of every model family against the number of training images per class."""
    seeds = params.get('seeds', (0, 1, 2))
    counts = params.get('training_images', TRAINING_COUNTS)
    classes = params.get('classes', 5)
    components = params.get('components', 30)
    images = params.get('images_per_identity', 10)

    trainers: Dict[str, Callable] = {
        'eigen': lambda data: train_eigenfaces(data, components),
        'fisher': train_fisherfaces,
        'lbph': train_lbph,
    }
    scores = {(name, count): [] for name in trainers for count in counts}
    for seed, data in _datasets(seeds, classes, images):
        for count in counts:
            train, test = split_per_class(data, count, seed)
            for name, trainer in trainers.items():
                try:
                    model = trainer(train)
                except (InvalidTrainingError, SingularScatterError, DegenerateModelError) as e:
                    logger.info(f"{name} with {count} image(s) per class not trainable: {e}")
                    continue
                scores[(name, count)].append(accuracy(model, test))

    header = ['images_per_class'] + [f"{name}_accuracy" for name in trainers]
    rows = [[count] + [_median(scores[(name, count)]) for name in trainers] for count in counts]
    return header, rows


def localization_vs_snr(params: dict) -> Table:
    """Median cell error of the combined map for a broadband source at a fixed cell."""
    seeds = params.get('seeds', tuple(range(10)))
    levels = params.get('snr_db', SNR_LEVELS)
    target = tuple(params.get('target_cell', TARGET_CELL))
    grid = SteeringGrid.plane()
    array = build_double_ring_array()
    position = tuple(float(v) for v in grid.cell_center(*target))

    header = ['snr_db', 'median_cell_error', 'mean_cell_error', 'within_one_cell']
    rows = []
    for snr in levels:
        errors = []
        for seed in seeds:
            scene = SceneDescription(sources=(SourceSpec(position=position),), snr_db=snr,
                                     seed=frame_seed(seed, int(snr * 10)))
            peak = find_peak(combined_srp_map(synthesize_scene(scene, array), array, grid))
            errors.append(cell_distance(peak.cell, target))
        rows.append([snr, round(float(np.median(errors)), 4), round(float(np.mean(errors)), 4),
                     round(float(np.mean(np.asarray(errors) <= 1.0)), 4)])
        logger.info(f"localization_vs_snr: {snr} dB median error {np.median(errors):.2f} cells")
    return header, rows


EXPERIMENTS: Dict[str, Callable[[dict], Table]] = {
    'accuracy_vs_components': accuracy_vs_components,
    'accuracy_vs_training_images': accuracy_vs_training_images,
    'localization_vs_snr': localization_vs_snr,
}


def run_experiment(name: str, params: dict = None) -> Table:
    if name not in EXPERIMENTS:
        raise UnknownExperimentError(f"Unknown experiment '{name}'; valid names: {', '.join(sorted(EXPERIMENTS))}")
    return EXPERIMENTS[name](params or {})


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = ['\t'.join(header)]
    lines.extend('\t'.join(str(value) for value in row) for row in rows)
    return '\n'.join(lines) + '\n'


def write_table(header: Sequence[str], rows: Sequence[Sequence], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_table(header, rows), encoding='utf-8')
    return path
