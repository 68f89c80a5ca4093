import json
import tempfile
from itertools import combinations
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy.signal import correlate, correlation_lags

from .geometry import (
    build_double_ring_array, expected_tdoa, min_mic_distance, spatial_alias_limit,
)
from .io import load_scene, read_audio, read_pgm, write_audio, write_pgm
from .models import (
    FaceSprite, GrayImage, MicArray, MultichannelSignal, SceneDescription, SourceSpec,
    InsufficientArrayError, InvalidGeometryError, InvalidSceneError,
)
from .sprites import render_synthetic_frame
from .synthesis import frame_seed, synthesize_scene


def brute_force_min_distance(mics):
    return min(np.linalg.norm(a - b) for a, b in combinations(mics, 2))


class DoubleRingArrayTests(SimpleTestCase):

    def test_default_array_has_sixteen_mics_on_two_radii(self):
        array = build_double_ring_array(0.2, 0.4, 7, 9, 0.0)
        self.assertEqual(array.size, 16)
        radii = np.linalg.norm(array.mics[:, :2], axis=1)
        np.testing.assert_allclose(radii[:7], 0.1)
        np.testing.assert_allclose(radii[7:], 0.2)
        np.testing.assert_array_equal(array.mics[:, 2], 0.0)

    def test_single_mic_sits_at_angle_zero(self):
        array = build_double_ring_array(0.2, 0.4, 1, 0, 0.0)
        np.testing.assert_allclose(array.mics, [[0.1, 0.0, 0.0]])

    def test_min_distance_matches_pair_scan(self):
        for counts in [(3, 5), (7, 9)]:
            array = build_double_ring_array(0.2, 0.4, *counts, 0.0)
            self.assertAlmostEqual(min_mic_distance(array), brute_force_min_distance(array.mics), places=12)

    def test_invalid_geometry_is_rejected(self):
        bad = [
            dict(inner_diameter=0.0),
            dict(inner_diameter=0.4, outer_diameter=0.2),
            dict(outer_diameter=float('nan')),
            dict(n_inner=0, n_outer=0),
            dict(n_inner=-1),
        ]
        for kwargs in bad:
            with self.subTest(kwargs=kwargs):
                with self.assertRaises(InvalidGeometryError):
                    build_double_ring_array(**kwargs)

    def test_ring_distances_do_not_depend_on_offset(self):
        def ring_distances(array):
            inner = sorted(np.round(np.linalg.norm(a - b), 9) for a, b in combinations(array.mics[:7], 2))
            outer = sorted(np.round(np.linalg.norm(a - b), 9) for a, b in combinations(array.mics[7:], 2))
            return inner, outer

        reference = ring_distances(build_double_ring_array(angular_offset=0.0))
        for offset in (0.1, 0.7, np.pi / 9):
            with self.subTest(offset=offset):
                self.assertEqual(ring_distances(build_double_ring_array(angular_offset=offset)), reference)

    def test_offset_by_outer_step_is_a_relabelling(self):
        base = build_double_ring_array(angular_offset=0.0)
        turned = build_double_ring_array(angular_offset=2 * np.pi / 9)
        for mic in turned.mics[7:]:
            self.assertLess(np.min(np.linalg.norm(base.mics[7:] - mic, axis=1)), 1e-12)


class AcousticGeometryTests(SimpleTestCase):

    def test_spatial_alias_limit(self):
        array = MicArray(np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]))
        self.assertAlmostEqual(spatial_alias_limit(array), 1715.0, places=6)
        array = MicArray(np.array([[0.0, 0.0, 0.0], [0.343, 0.0, 0.0]]))
        self.assertAlmostEqual(spatial_alias_limit(array), 500.0, places=6)

    def test_spatial_alias_limit_matches_pair_scan_for_default_array(self):
        array = build_double_ring_array()
        expected = 343.0 / (2 * brute_force_min_distance(array.mics))
        self.assertAlmostEqual(spatial_alias_limit(array), expected, places=9)

    def test_spatial_alias_limit_needs_two_mics(self):
        with self.assertRaises(InsufficientArrayError):
            spatial_alias_limit(build_double_ring_array(0.2, 0.4, 1, 0))

    def test_expected_tdoa(self):
        array = MicArray(np.array([[-0.05, 0.0, 0.0], [0.05, 0.0, 0.0]]))
        self.assertEqual(expected_tdoa(array, (0, 1), (0.0, 0.3, 1.0)), 0.0)
        self.assertAlmostEqual(expected_tdoa(array, (0, 1), (-0.05, 0.0, 0.0)), -0.1 / 343.0, places=12)
        far = expected_tdoa(array, (0, 1), (100.0, 0.0, 1.0))
        self.assertAlmostEqual(far / (0.1 / 343.0), 1.0, delta=0.01)

    def test_expected_tdoa_rejects_bad_index(self):
        array = build_double_ring_array()
        with self.assertRaises(InvalidGeometryError):
            expected_tdoa(array, (0, 16), (0.0, 0.0, 1.0))


class SynthesisTests(SimpleTestCase):

    def test_axis_source_gives_identical_inner_ring_channels(self):
        scene = SceneDescription(sources=(SourceSpec((0.0, 0.0, 2.0)),), snr_db=None, seed=3)
        signal = synthesize_scene(scene, build_double_ring_array())
        for channel in range(1, 7):
            np.testing.assert_array_equal(signal.channels[channel], signal.channels[0])
        for channel in range(8, 16):
            np.testing.assert_array_equal(signal.channels[channel], signal.channels[7])

    def test_two_mic_delay_matches_expected_tdoa(self):
        array = MicArray(np.array([[-0.05, 0.0, 0.0], [0.05, 0.0, 0.0]]))
        point = (-1.0, 0.0, 0.1)
        scene = SceneDescription(sources=(SourceSpec(point),), snr_db=None, seed=11)
        signal = synthesize_scene(scene, array, sample_rate=32000, duration=0.128)
        a, b = signal.channels
        lags = correlation_lags(b.size, a.size)
        lag = lags[np.argmax(correlate(b, a, mode='full'))]
        expected = -expected_tdoa(array, (0, 1), point) * 32000
        self.assertLessEqual(abs(lag - expected), 0.5)

    def test_cross_correlation_matches_tdoa_for_every_pair(self):
        array = build_double_ring_array()
        point = (0.8, -0.4, 1.5)
        scene = SceneDescription(sources=(SourceSpec(point),), snr_db=20.0, seed=5)
        signal = synthesize_scene(scene, array, sample_rate=32000, duration=0.128)
        for a, b in combinations(range(array.size), 2):
            x_a, x_b = signal.channels[a], signal.channels[b]
            lags = correlation_lags(x_b.size, x_a.size)
            lag = lags[np.argmax(correlate(x_b, x_a, mode='full'))]
            expected = -expected_tdoa(array, (a, b), point) * 32000
            self.assertLessEqual(abs(lag - expected), 0.6, msg=f"pair {(a, b)}")

    def test_same_seed_gives_identical_noise(self):
        scene = SceneDescription(sources=(), seed=9)
        array = build_double_ring_array()
        first = synthesize_scene(scene, array)
        second = synthesize_scene(scene, array)
        np.testing.assert_array_equal(first.channels, second.channels)
        self.assertEqual(first.channels.shape, (16, 4096))
        self.assertGreater(np.std(first.channels), 0.5)

    def test_source_behind_array_is_rejected(self):
        scene = SceneDescription(sources=(SourceSpec((0.0, 0.0, -1.0)),))
        with self.assertRaises(InvalidSceneError):
            synthesize_scene(scene, build_double_ring_array())

    def test_non_positive_duration_is_rejected(self):
        with self.assertRaises(InvalidSceneError):
            synthesize_scene(SceneDescription(), build_double_ring_array(), duration=0.0)

    def test_frame_seeds_are_stable_and_distinct(self):
        self.assertEqual(frame_seed(42, 3), frame_seed(42, 3))
        self.assertEqual(len({frame_seed(42, k) for k in range(10)}), 10)


class RenderTests(SimpleTestCase):

    def test_empty_scene_renders_background_only(self):
        frame = render_synthetic_frame(SceneDescription(seed=1), 160, 120)
        self.assertEqual((frame.image.width, frame.image.height), (160, 120))
        self.assertEqual(frame.sprites, ())
        self.assertLess(abs(float(frame.image.pixels.mean()) - 100.0), 10.0)

    def test_sprite_truth_box_is_centered_on_sprite(self):
        scene = SceneDescription(face_sprites=(FaceSprite('alice', 100.0, 80.0, 1.0),))
        truth = render_synthetic_frame(scene, 200, 160).sprites[0]
        self.assertEqual(truth.identity, 'alice')
        self.assertEqual(truth.center, (100.0, 80.0))
        self.assertEqual(truth.box[2:], (64.0, 64.0))
        self.assertLess(truth.left_eye[0], truth.right_eye[0])

    def test_render_is_deterministic(self):
        scene = SceneDescription(seed=4, face_sprites=(FaceSprite('bob', 90.0, 70.0, 1.2, 10.0),))
        first = render_synthetic_frame(scene, 200, 160)
        second = render_synthetic_frame(scene, 200, 160)
        np.testing.assert_array_equal(first.image.pixels, second.image.pixels)

    def test_out_of_bounds_sprite_is_rejected(self):
        scene = SceneDescription(face_sprites=(FaceSprite('carol', 10.0, 10.0, 1.0),))
        with self.assertRaises(InvalidSceneError):
            render_synthetic_frame(scene, 200, 160)


class SceneFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def write_scene(self, data):
        path = self.root / 'scene.json'
        path.write_text(json.dumps(data))
        return path

    def test_load_scene_fills_defaults(self):
        path = self.write_scene({
            'sources': [{'position': [0.1, 0.2, 2.0]}],
            'face_sprites': [{'identity': 'alice', 'position': [320, 240]}],
        })
        scene = load_scene(path)
        self.assertEqual(scene.sources[0].signal_kind, 'white_noise')
        self.assertEqual(scene.snr_db, 20.0)
        self.assertEqual(scene.face_sprites[0], FaceSprite('alice', 320.0, 240.0, 1.0, 0.0))

    def test_missing_scene_file_names_the_path(self):
        missing = self.root / 'nope.json'
        with self.assertRaisesRegex(FileNotFoundError, 'nope.json'):
            load_scene(missing)

    def test_invalid_scene_names_the_field(self):
        path = self.write_scene({'sources': [{'position': [0.0, 0.0, -2.0]}]})
        with self.assertRaisesRegex(InvalidSceneError, r'sources\.0\.position'):
            load_scene(path)

    def test_sine_without_frequency_is_rejected(self):
        path = self.write_scene({'sources': [{'position': [0.0, 0.0, 2.0], 'signal_kind': 'sine'}]})
        with self.assertRaisesRegex(InvalidSceneError, 'frequency'):
            load_scene(path)

    def test_audio_file_keeps_channels_and_rate(self):
        channels = np.arange(12, dtype=float).reshape(3, 4) / 8.0
        path = write_audio(MultichannelSignal(16000.0, channels), self.root / 'frame.f32')
        loaded = read_audio(path)
        self.assertEqual(loaded.sample_rate, 16000.0)
        np.testing.assert_array_equal(loaded.channels, channels)

    def test_pgm_file_keeps_pixels(self):
        pixels = np.random.default_rng(0).integers(0, 256, size=(6, 9)).astype(np.uint8)
        path = write_pgm(GrayImage(pixels), self.root / 'frame.pgm')
        self.assertTrue(path.read_bytes().startswith(b'P5'))
        np.testing.assert_array_equal(read_pgm(path).pixels, pixels)
