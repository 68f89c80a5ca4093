import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from scene_sim.models import FaceSprite, SceneDescription
from scene_sim.sprites import render_synthetic_frame

from .classifier import calibrate_unknown_threshold, knn_classify, vote, with_threshold
from .datasets import split_per_class, synthesize_face_dataset
from .lbph import (
    bin_count, lbp_codes, lbph_descriptor, sample_offsets, train_lbph, uniform_mapping,
)
from .linalg import jacobi_eigh
from .models import (
    EigenModel, FaceDataset, UNKNOWN, DegenerateModelError, FaceShapeError, InvalidGridError,
    InvalidTrainingError, ModelFormatError, NoModelError, PreprocessingError, SingularScatterError,
)
from .preprocessing import (
    LEFT_EYE_TARGET, RIGHT_EYE_TARGET, align_face, elliptical_mask, equalize_masked, preprocess_face,
)
from .storage import dumps_model, load_model, model_from_dict, model_to_dict, save_model
from .subspace import (
    project, reconstruct, reconstruction_error, scatter_matrices, train_eigenfaces, train_fisherfaces,
)


def random_dataset(seed, classes, per_class, shape=(6, 6), spread=40.0, noise=8.0):
    """Gaussian blobs in pixel space, one blob per class."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(60, 190, size=(classes,) + shape)
    images, labels = [], []
    for label in range(classes):
        for _ in range(per_class):
            images.append(centers[label] + rng.normal(0, noise, size=shape) + rng.normal(0, spread / 10))
            labels.append(label)
    return FaceDataset(np.stack(images), np.array(labels), tuple(f"id{c}" for c in range(classes)))


def canonical_frame(identity='alice', seed=1):
    """A 64x64 frame whose sprite eyes already sit at the canonical targets."""
    scene = SceneDescription(seed=seed, face_sprites=(FaceSprite(identity, 32.0, 32.0, 1.0),))
    return render_synthetic_frame(scene, 64, 64)


class JacobiTests(SimpleTestCase):

    def test_matches_dense_solver(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((7, 7))
        matrix = a + a.T
        values, vectors = jacobi_eigh(matrix)
        expected = np.linalg.eigvalsh(matrix)[::-1]
        np.testing.assert_allclose(values, expected, atol=1e-8)
        np.testing.assert_allclose(matrix @ vectors, vectors * values, atol=1e-8)
        np.testing.assert_allclose(vectors.T @ vectors, np.eye(7), atol=1e-10)

    def test_rejects_non_symmetric_input(self):
        with self.assertRaises(ValueError):
            jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with self.assertRaises(ValueError):
            jacobi_eigh(np.ones((2, 3)))


class PreprocessingTests(SimpleTestCase):

    def targets(self, size=64):
        return [(LEFT_EYE_TARGET[0] * size, LEFT_EYE_TARGET[1] * size),
                (RIGHT_EYE_TARGET[0] * size, RIGHT_EYE_TARGET[1] * size)]

    def test_canonical_input_only_gets_masked_and_equalized(self):
        frame = canonical_frame()
        aligned = align_face(frame.image, (0, 0, 64, 64), self.targets())
        self.assertAlmostEqual(aligned.scale, 1.0)
        self.assertAlmostEqual(aligned.angle, 0.0)
        expected = equalize_masked(frame.image.pixels.astype(float), elliptical_mask(64))
        np.testing.assert_array_equal(aligned.image.pixels, expected)

    def test_detected_eyes_of_canonical_face_are_near_targets(self):
        frame = canonical_frame('bob')
        aligned = align_face(frame.image, (0, 0, 64, 64))
        for found, target in zip(aligned.eyes, self.targets()):
            self.assertLess(math.dist(found, target), 1.0)

    def test_rotated_face_eyes_land_on_targets(self):
        scene = SceneDescription(seed=2, face_sprites=(FaceSprite('carol', 64.0, 64.0, 1.0, 10.0),))
        frame = render_synthetic_frame(scene, 128, 128)
        truth = frame.sprites[0]
        aligned = align_face(frame.image, truth.box)
        self.assertAlmostEqual(aligned.angle, 10.0, delta=2.0)
        for eye, target in zip((truth.left_eye, truth.right_eye), self.targets()):
            self.assertLess(math.dist(aligned.to_canonical(eye), target), 1.0)

    def test_brightness_shift_does_not_change_output(self):
        pixels = np.clip(canonical_frame().image.pixels.astype(float), 30, 220)
        base = preprocess_face(pixels, (0, 0, 64, 64), self.targets())
        shifted = preprocess_face(pixels + 20, (0, 0, 64, 64), self.targets())
        np.testing.assert_array_equal(shifted.pixels, base.pixels)

    def test_output_is_masked_outside_ellipse(self):
        face = preprocess_face(canonical_frame().image, (0, 0, 64, 64))
        self.assertEqual((face.width, face.height), (64, 64))
        self.assertTrue(np.all(face.pixels[~elliptical_mask(64)] == 0))

    def test_flat_face_has_no_eyes(self):
        with self.assertRaises(PreprocessingError):
            preprocess_face(np.full((64, 64), 128.0), (0, 0, 64, 64))

    def test_box_outside_image(self):
        with self.assertRaises(FaceShapeError):
            preprocess_face(np.zeros((64, 64)), (40, 40, 64, 64))


class EigenfaceTests(SimpleTestCase):

    def test_matches_dense_covariance_eigenvectors(self):
        data = random_dataset(1, classes=2, per_class=2, shape=(3, 3))
        model = train_eigenfaces(data, components=9)
        centered = data.vectors() - data.vectors().mean(axis=0)
        values, vectors = np.linalg.eigh(centered.T @ centered)
        order = np.argsort(values)[::-1][:model.components]
        self.assertEqual(model.components, 3)
        np.testing.assert_allclose(model.eigenvalues * data.size, values[order], rtol=1e-6)
        for k, column in enumerate(order):
            dense = vectors[:, column]
            sign = np.sign(np.dot(dense, model.eigenfaces[k]))
            np.testing.assert_allclose(model.eigenfaces[k], sign * dense, atol=1e-6)

    def test_components_are_orthonormal_and_ordered(self):
        model = train_eigenfaces(random_dataset(2, classes=3, per_class=4), components=30)
        self.assertLessEqual(model.components, 12)
        np.testing.assert_allclose(model.eigenfaces @ model.eigenfaces.T, np.eye(model.components), atol=1e-6)
        self.assertTrue(np.all(model.eigenvalues >= 0))
        self.assertTrue(np.all(np.diff(model.eigenvalues) <= 1e-12))

    def test_identical_images_have_rank_zero(self):
        image = np.arange(16, dtype=float).reshape(4, 4)
        data = FaceDataset(np.stack([image] * 3), np.array([0, 1, 1]), ('a', 'b'))
        model = train_eigenfaces(data, components=5)
        self.assertEqual(model.components, 0)
        np.testing.assert_allclose(model.mean, image.ravel())

    def test_two_images_give_difference_direction(self):
        rng = np.random.default_rng(3)
        first, second = rng.uniform(0, 255, size=(2, 5, 5))
        model = train_eigenfaces(FaceDataset(np.stack([first, second]), np.array([0, 1]), ('a', 'b')))
        self.assertEqual(model.components, 1)
        direction = (first - second).ravel()
        self.assertAlmostEqual(abs(np.dot(model.eigenfaces[0], direction / np.linalg.norm(direction))), 1.0)

    def test_projection(self):
        data = random_dataset(4, classes=2, per_class=3)
        model = train_eigenfaces(data, components=4)
        mean = model.mean.reshape(6, 6)
        np.testing.assert_allclose(project(model, mean), np.zeros(4), atol=1e-9)
        expected = np.zeros(4)
        expected[0] = 3.0
        np.testing.assert_allclose(project(model, mean + 3 * model.eigenfaces[0].reshape(6, 6)), expected, atol=1e-6)

        query = np.random.default_rng(5).uniform(0, 255, size=(6, 6))
        coeffs, *_ = np.linalg.lstsq(model.eigenfaces.T, query.ravel() - model.mean, rcond=None)
        np.testing.assert_allclose(project(model, query), coeffs, atol=1e-6)

    def test_reconstruction(self):
        data = random_dataset(6, classes=2, per_class=3)
        model = train_eigenfaces(data, components=30)
        np.testing.assert_allclose(reconstruct(model, np.zeros(2)), model.mean)
        image = data.images[1]
        errors = [reconstruction_error(model, image, e) for e in range(1, model.components + 1)]
        self.assertTrue(all(b <= a + 1e-9 for a, b in zip(errors, errors[1:])))
        self.assertLessEqual(errors[-1] / np.linalg.norm(image), 1e-5)

    def test_invalid_training(self):
        data = random_dataset(7, classes=2, per_class=2)
        with self.assertRaises(InvalidTrainingError):
            train_eigenfaces(data, components=0)
        with self.assertRaises(InvalidTrainingError):
            train_eigenfaces(FaceDataset(data.images[:1], [0], ('a',)))

    def test_shape_mismatch(self):
        model = train_eigenfaces(random_dataset(8, classes=2, per_class=2))
        with self.assertRaises(FaceShapeError):
            project(model, np.zeros((5, 5)))


class FisherfaceTests(SimpleTestCase):

    def test_projection_rank_is_classes_minus_one(self):
        for classes in (2, 3, 5):
            with self.subTest(classes=classes):
                data = random_dataset(classes, classes=classes, per_class=4)
                model = train_fisherfaces(data)
                self.assertEqual(model.projection.shape, (classes - 1, 36))
                self.assertEqual(train_fisherfaces(data, components=10).components, classes - 1)

    def test_singular_within_class_scatter(self):
        rng = np.random.default_rng(9)
        a, b = rng.uniform(0, 255, size=(2, 4, 4))
        data = FaceDataset(np.stack([a, a, b]), np.array([0, 0, 1]), ('a', 'b'))
        with self.assertRaisesRegex(SingularScatterError, 'more distinct images per class'):
            train_fisherfaces(data)

    def test_equal_class_means(self):
        rng = np.random.default_rng(10)
        a, b = rng.uniform(0, 255, size=(2, 4, 4))
        data = FaceDataset(np.stack([a, b, b, a]), np.array([0, 0, 1, 1]), ('a', 'b'))
        with self.assertRaises(DegenerateModelError):
            train_fisherfaces(data)

    def test_too_few_images_or_classes(self):
        data = random_dataset(11, classes=2, per_class=1)
        with self.assertRaises(InvalidTrainingError):
            train_fisherfaces(data)
        single = random_dataset(11, classes=1, per_class=4)
        with self.assertRaises(InvalidTrainingError):
            train_fisherfaces(single)

    def test_fisher_criterion_beats_random_projections(self):
        data = random_dataset(12, classes=3, per_class=10, shape=(2, 3), noise=15.0)
        between, within = scatter_matrices(data.vectors(), data.labels)

        def criterion(w):
            return float(np.trace(np.linalg.solve(w @ within @ w.T, w @ between @ w.T)))

        best = criterion(train_fisherfaces(data).projection)
        rng = np.random.default_rng(13)
        for _ in range(100):
            self.assertGreater(best, criterion(rng.standard_normal((2, 6))))


class LbphTests(SimpleTestCase):

    def test_sample_order_starts_right_and_turns_counter_clockwise(self):
        np.testing.assert_allclose(sample_offsets(4, 1), [(1, 0), (0, -1), (-1, 0), (0, 1)], atol=1e-12)

    def test_flat_image_codes_are_all_ones(self):
        descriptor = lbph_descriptor(np.full((20, 20), 77.0), grid=(3, 3))
        histograms = descriptor.reshape(9, 256)
        self.assertTrue(np.all(histograms[:, :255] == 0))
        self.assertTrue(np.all(histograms[:, 255] == 36))

    def test_cell_histograms_sum_to_coded_pixels(self):
        image = np.random.default_rng(14).integers(0, 256, size=(23, 17)).astype(float)
        codes = lbp_codes(image)
        histograms = lbph_descriptor(image, grid=(3, 4)).reshape(12, 256)
        self.assertEqual(histograms.sum(), codes.size)
        rows = np.array_split(np.arange(codes.shape[0]), 4)
        cols = np.array_split(np.arange(codes.shape[1]), 3)
        expected = [len(r) * len(c) for r in rows for c in cols]
        np.testing.assert_array_equal(histograms.sum(axis=1), expected)

    def test_single_cell_grid(self):
        image = np.random.default_rng(15).integers(0, 256, size=(10, 12)).astype(float)
        descriptor = lbph_descriptor(image, grid=(1, 1))
        self.assertEqual(descriptor.shape, (256,))
        self.assertEqual(descriptor.sum(), 8 * 10)

    def test_default_descriptor_survives_increasing_curves(self):
        rng = np.random.default_rng(31)
        image = rng.integers(0, 256, size=(32, 32))
        reference_codes = lbp_codes(image.astype(float))
        reference = lbph_descriptor(image.astype(float))
        curves = [np.sqrt(np.arange(256) / 255.0) * 255.0]
        curves += [np.cumsum(rng.uniform(0.01, 5.0, size=256)) for _ in range(19)]
        for index, curve in enumerate(curves):
            with self.subTest(curve=index):
                np.testing.assert_array_equal(lbp_codes(curve[image]), reference_codes)
                np.testing.assert_array_equal(lbph_descriptor(curve[image]), reference)

    def test_default_sampling_is_nearest(self):
        data = FaceDataset(np.zeros((2, 12, 12)), np.array([0, 1]), ('a', 'b'))
        self.assertEqual(train_lbph(data, grid=(1, 1)).interpolation, 'nearest')

    def test_monotone_tone_map_keeps_histograms(self):
        rng = np.random.default_rng(16)
        image = rng.integers(0, 256, size=(24, 24))
        curve = np.cumsum(rng.integers(1, 4, size=256)).astype(float)
        for kwargs in (dict(neighbors=4, radius=1, interpolation='bilinear'),
                       dict(neighbors=8, radius=2, interpolation='nearest')):
            with self.subTest(**kwargs):
                np.testing.assert_array_equal(
                    lbph_descriptor(curve[image], grid=(4, 4), **kwargs),
                    lbph_descriptor(image.astype(float), grid=(4, 4), **kwargs),
                )

    def test_uniform_bins(self):
        self.assertEqual(bin_count(8, True), 59)
        self.assertEqual(int(uniform_mapping(8).max()), 58)
        self.assertEqual(lbph_descriptor(np.full((12, 12), 5.0), grid=(2, 2), uniform=True).size, 4 * 59)

    def test_grid_too_fine(self):
        with self.assertRaises(InvalidGridError):
            lbph_descriptor(np.zeros((10, 10)), grid=(8, 8))

    def test_image_too_small_for_radius(self):
        data = FaceDataset(np.zeros((2, 4, 4)), np.array([0, 1]), ('a', 'b'))
        with self.assertRaises(InvalidTrainingError):
            train_lbph(data, radius=2, grid=(1, 1))


class KnnTests(SimpleTestCase):

    def setUp(self):
        self.data = random_dataset(17, classes=3, per_class=4)

    def test_gallery_image_matches_itself(self):
        for model in (train_eigenfaces(self.data), train_fisherfaces(self.data),
                      train_lbph(self.data, grid=(1, 1))):
            with self.subTest(kind=model.kind):
                result = knn_classify(model, self.data.images[5])
                self.assertEqual(result.label, self.data.class_names[self.data.labels[5]])
                self.assertAlmostEqual(result.distance, 0.0, places=6)

    def test_threshold_gives_unknown(self):
        model = train_eigenfaces(self.data)
        query = np.random.default_rng(18).uniform(0, 255, size=(6, 6))
        result = knn_classify(model, query, unknown_threshold=1e-3, position=(1, 2, 10, 10))
        self.assertEqual(result.label, UNKNOWN)
        self.assertIn(result.nearest_label, self.data.class_names)
        self.assertEqual(result.center, (6.0, 7.0))
        self.assertEqual(knn_classify(with_threshold(model, 1e-3), query).label, UNKNOWN)

    def test_majority_and_ties(self):
        distances = np.array([0.1, 0.2, 0.3, 9.0])
        labels = np.array([1, 0, 0, 1])
        self.assertEqual(vote(distances, labels, 3), (0, 0.1))
        self.assertEqual(vote(distances, labels, 2)[0], 1)

    def test_decision_ignores_order_preserving_rescaling(self):
        distances = np.random.default_rng(19).uniform(0, 10, size=12)
        labels = np.arange(12) % 3
        for k in (1, 3, 5):
            self.assertEqual(vote(distances, labels, k)[0], vote(3 * distances ** 2 + 1, labels, k)[0])

    def test_invalid_queries(self):
        model = train_eigenfaces(self.data)
        with self.assertRaises(ValueError):
            knn_classify(model, self.data.images[0], k=0)
        with self.assertRaises(ValueError):
            knn_classify(model, self.data.images[0], k=13)
        with self.assertRaises(NoModelError):
            knn_classify(None, self.data.images[0])

    def test_calibrated_threshold(self):
        model = EigenModel(mean=np.zeros(1), eigenfaces=np.ones((1, 1)), eigenvalues=np.ones(1),
                           gallery=np.array([[0.0], [1.0], [3.0]]), gallery_labels=np.array([0, 0, 1]),
                           class_names=('a', 'b'), image_shape=(1, 1))
        self.assertAlmostEqual(calibrate_unknown_threshold(model), 4 / 3 + 2 * math.sqrt(2 / 9))
        single = EigenModel(mean=np.zeros(1), eigenfaces=np.ones((1, 1)), eigenvalues=np.ones(1),
                            gallery=np.zeros((1, 1)), gallery_labels=np.array([0]),
                            class_names=('a',), image_shape=(1, 1))
        self.assertEqual(calibrate_unknown_threshold(single), math.inf)


class SyntheticFaceTests(SimpleTestCase):

    def test_dataset_is_seeded(self):
        first = synthesize_face_dataset(('alice', 'bob'), 3, seed=4)
        second = synthesize_face_dataset(('alice', 'bob'), 3, seed=4)
        np.testing.assert_array_equal(first.images, second.images)
        self.assertEqual(first.class_names, ('alice', 'bob'))
        self.assertEqual(first.image_shape, (64, 64))

    def test_eigenfaces_recognize_held_out_faces(self):
        data = synthesize_face_dataset(('alice', 'bob', 'carol'), 6, seed=1)
        train, test = split_per_class(data, 3, seed=1)
        model = train_eigenfaces(train)
        correct = sum(
            knn_classify(model, image).label == test.class_names[label]
            for image, label in zip(test.images, test.labels)
        )
        self.assertGreaterEqual(correct / test.size, 0.8)

    def test_split_needs_held_out_images(self):
        data = synthesize_face_dataset(('alice', 'bob'), 2, seed=0)
        with self.assertRaises(InvalidTrainingError):
            split_per_class(data, 2)


class ModelFileTests(SimpleTestCase):

    def setUp(self):
        self.data = random_dataset(20, classes=3, per_class=4)

    def test_saved_models_answer_like_the_originals(self):
        query = self.data.images[7] + 1.5
        models = (train_eigenfaces(self.data, drop_leading=1), train_fisherfaces(self.data),
                  train_lbph(self.data, grid=(1, 1), uniform=True))
        with tempfile.TemporaryDirectory() as tmp:
            for model in models:
                with self.subTest(kind=model.kind):
                    model = with_threshold(model, 12.5)
                    loaded = load_model(save_model(model, Path(tmp) / f"{model.kind}.json"))
                    self.assertEqual(type(loaded), type(model))
                    self.assertEqual(loaded.unknown_threshold, 12.5)
                    np.testing.assert_array_equal(loaded.gallery, model.gallery)
                    self.assertEqual(knn_classify(loaded, query), knn_classify(model, query))

    def test_serialization_is_deterministic(self):
        model = train_eigenfaces(self.data)
        text = dumps_model(model)
        self.assertEqual(dumps_model(model_from_dict(model_to_dict(model))), text)
        self.assertIsNone(model_to_dict(model)['unknown_threshold'])

    def test_bad_model_files(self):
        data = model_to_dict(train_eigenfaces(self.data))
        data['version'] = 99
        with self.assertRaises(ModelFormatError):
            model_from_dict(data)
        data = model_to_dict(train_eigenfaces(self.data))
        del data['arrays']['eigenfaces']
        with self.assertRaises(ModelFormatError):
            model_from_dict(data)
        with self.assertRaises(FileNotFoundError):
            load_model('/nonexistent/model.json')
