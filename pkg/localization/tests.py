import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from scene_sim.geometry import SPEED_OF_SOUND, build_double_ring_array, mic_distances
from scene_sim.models import MicArray, MultichannelSignal, SceneDescription, SourceSpec
from scene_sim.synthesis import frame_seed, synthesize_scene

from .beamformer import (
    combined_srp_map, estimate_bandwidth, find_peak, gcc, phat_weight, select_weighting, srp_map,
)
from .colormap import power_to_rgb, write_color_map, write_power_matrix
from .models import (
    MapMode, SteeredPowerMap, SteeringGrid, Weighting, ShapeError, SteeringGridError, cell_distance,
)

TARGET_CELL = (40, 20)


def naive_correlation(x1, x2):
    """r[L] = sum_n x1[n] * x2[n + L] for L in -(N-1)..N-1."""
    n = x1.size
    values = []
    for lag in range(-(n - 1), n):
        lo, hi = max(0, -lag), min(n, n - lag)
        values.append(float(np.dot(x1[lo:hi], x2[lo + lag:hi + lag])))
    return np.array(values)


def planted_scene(seed, kind='white_noise', snr_db=20.0, cell=TARGET_CELL):
    grid = SteeringGrid.plane()
    source = SourceSpec(tuple(grid.cell_center(*cell)), signal_kind=kind,
                        frequency=1000.0 if kind == 'sine' else None)
    return SceneDescription(sources=(source,), snr_db=snr_db, seed=seed)


class PhatWeightTests(SimpleTestCase):

    def test_weight_is_inverse_cross_magnitude(self):
        x1, x2 = 2 * np.exp(1j * np.pi / 4), 4.0
        self.assertAlmostEqual(phat_weight(x1 * np.conj(x2)), 1 / 8)
        self.assertEqual(phat_weight(0j), 1e12)
        self.assertAlmostEqual(phat_weight(np.exp(0.3j)), 1.0)


class GccTests(SimpleTestCase):

    def test_const_matches_naive_correlation(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(16, 200))
            x1, x2 = rng.standard_normal(n), rng.standard_normal(n)
            result = gcc(x1, x2, Weighting.CONST)
            expected = naive_correlation(x1, x2)
            np.testing.assert_array_equal(result.lags, np.arange(-(n - 1), n))
            scale = np.abs(expected).max()
            self.assertLess(np.abs(result.values - expected).max() / scale, 1e-6)

    def test_planted_delays_are_recovered(self):
        rng = np.random.default_rng(7)
        source = rng.standard_normal(4096 + 64)
        x1 = source[64:]
        for delay in (1, 5, 17, 33, 50):
            x2 = source[64 - delay:64 - delay + 4096]
            for weighting in Weighting:
                with self.subTest(delay=delay, weighting=weighting):
                    self.assertEqual(gcc(x1, x2, weighting).peak_lag, delay)

    def test_identical_channels_peak_at_zero(self):
        x = np.random.default_rng(1).standard_normal(512)
        for weighting in Weighting:
            self.assertEqual(gcc(x, x, weighting).peak_lag, 0)

    def test_sine_correlation_repeats_every_period(self):
        t = np.arange(1024) / 32000.0
        x = np.sin(2 * np.pi * 1000.0 * t)
        result = gcc(x, x, Weighting.CONST)
        window = [result.value_at(lag) for lag in range(16, 49)]
        self.assertEqual(16 + int(np.argmax(window)), 32)
        window = [result.value_at(lag) for lag in range(48, 81)]
        self.assertEqual(48 + int(np.argmax(window)), 64)

    def test_mismatched_lengths_are_rejected(self):
        with self.assertRaises(ShapeError):
            gcc(np.zeros(32), np.zeros(33))
        with self.assertRaises(ShapeError):
            gcc(np.zeros(8), np.zeros(8))


class BandwidthTests(SimpleTestCase):

    def test_silent_frame_has_no_bandwidth(self):
        self.assertEqual(estimate_bandwidth(MultichannelSignal(32000.0, np.zeros((2, 256)))), 0.0)

    def test_sine_is_narrowband(self):
        t = np.arange(8192) / 32000.0
        frame = MultichannelSignal(32000.0, np.sin(2 * np.pi * 1000.0 * t)[None, :])
        self.assertLess(estimate_bandwidth(frame), 200.0)

    def test_white_noise_is_wideband(self):
        noise = np.random.default_rng(3).standard_normal((4, 4096))
        self.assertGreater(estimate_bandwidth(MultichannelSignal(32000.0, noise)), 10000.0)

    def test_short_frame_is_rejected(self):
        with self.assertRaises(ShapeError):
            estimate_bandwidth(MultichannelSignal(32000.0, np.zeros((1, 32))))


class SteeringGridTests(SimpleTestCase):

    def test_cell_center_matches_affine_form(self):
        grid = SteeringGrid.plane(distance=2.0, half_width=1.5, half_height=1.125, n_u=64, n_v=48)
        expected = np.array([-1.5, 1.125, 2.0]) + (17.5 / 64) * np.array([3.0, 0, 0]) \
            + (30.5 / 48) * np.array([0, -2.25, 0])
        np.testing.assert_allclose(grid.cell_center(17, 30), expected)
        np.testing.assert_allclose(grid.cell_centers()[17, 30], expected)
        np.testing.assert_allclose(grid.cell_of(expected), (17.0, 30.0), atol=1e-9)

    def test_degenerate_axes_are_rejected(self):
        with self.assertRaises(SteeringGridError):
            SteeringGrid(np.zeros(3), np.array([1.0, 0, 0]), np.array([2.0, 0, 0]), 4, 4)
        with self.assertRaises(SteeringGridError):
            SteeringGrid.plane(n_u=0)


class SrpMapTests(SimpleTestCase):

    def setUp(self):
        self.array = build_double_ring_array()
        self.grid = SteeringGrid.plane()

    def test_noise_free_source_is_found(self):
        signal = synthesize_scene(planted_scene(1, snr_db=None), self.array)
        peak = find_peak(srp_map(signal, self.array, self.grid, Weighting.PHAT))
        self.assertLessEqual(cell_distance(peak.cell, TARGET_CELL), 1.0)

    def test_broadband_source_localized_in_nine_of_ten_trials(self):
        hits = 0
        for trial in range(10):
            signal = synthesize_scene(planted_scene(frame_seed(2024, trial)), self.array)
            power_map = combined_srp_map(signal, self.array, self.grid)
            self.assertEqual(power_map.mode_used, MapMode.SRP_PHAT)
            hits += cell_distance(find_peak(power_map).cell, TARGET_CELL) <= 1.0
        self.assertGreaterEqual(hits, 9)

    def test_silent_frame_gives_flat_map(self):
        signal = synthesize_scene(SceneDescription(seed=8), self.array)
        power = srp_map(signal, self.array, self.grid).power
        self.assertLess(power.max() / power.mean(), 2.0)

    def test_phat_map_ignores_global_gain(self):
        signal = synthesize_scene(planted_scene(4), self.array)
        louder = MultichannelSignal(signal.sample_rate, signal.channels * 37.0)
        base = srp_map(signal, self.array, self.grid, Weighting.PHAT).power
        scaled = srp_map(louder, self.array, self.grid, Weighting.PHAT).power
        np.testing.assert_allclose(scaled, base, rtol=1e-6)

    def test_const_argmax_ignores_global_gain(self):
        signal = synthesize_scene(planted_scene(4), self.array)
        louder = MultichannelSignal(signal.sample_rate, signal.channels * 0.01)
        base = find_peak(srp_map(signal, self.array, self.grid, Weighting.CONST))
        scaled = find_peak(srp_map(louder, self.array, self.grid, Weighting.CONST))
        self.assertEqual(scaled.cell, base.cell)

    def test_two_mic_map_is_symmetric_about_mic_axis(self):
        array = MicArray(np.array([[-0.05, 0.0, 0.0], [0.05, 0.0, 0.0]]))
        scene = SceneDescription(sources=(SourceSpec((0.0, 0.0, 2.0)),), snr_db=None, seed=2)
        power = srp_map(synthesize_scene(scene, array), array, self.grid).power
        np.testing.assert_allclose(power, power[:, ::-1], rtol=1e-9)
        peak = find_peak(SteeredPowerMap(self.grid, power, MapMode.SRP_PHAT))
        self.assertAlmostEqual(power[peak.i, self.grid.n_v - 1 - peak.j], peak.power)

    def test_power_is_pair_sum_over_autocorrelation_baseline(self):
        array = MicArray(np.array([[-0.05, 0.0, 0.0], [0.05, 0.02, 0.0]]))
        scene = SceneDescription(sources=(SourceSpec((0.3, 0.1, 2.0)),), snr_db=20.0, seed=5)
        signal = synthesize_scene(scene, array)
        x0, x1 = signal.channels
        power = srp_map(signal, array, self.grid, Weighting.PHAT).power

        baseline = gcc(x0, x0).value_at(0) + gcc(x1, x1).value_at(0)
        pair = gcc(x1, x0)
        distances = mic_distances(array, self.grid.cell_centers().reshape(-1, 3))
        lags = np.rint((distances[:, 0] - distances[:, 1]) / SPEED_OF_SOUND * signal.sample_rate)
        pair_sum = np.array([pair.value_at(lag) for lag in lags]).reshape(self.grid.shape)
        np.testing.assert_allclose(power, np.maximum(baseline + 2.0 * pair_sum, 0.0), atol=1e-9)
        self.assertEqual(np.argmax(power), np.argmax(pair_sum))

    def test_channel_count_must_match_array(self):
        signal = MultichannelSignal(32000.0, np.zeros((3, 256)))
        with self.assertRaises(ShapeError):
            srp_map(signal, self.array, self.grid)


class CombinedMapTests(SimpleTestCase):

    def setUp(self):
        self.array = build_double_ring_array()
        self.grid = SteeringGrid.plane()

    def test_sine_selects_plain_srp_and_beats_forced_phat(self):
        const_errors, phat_errors = [], []
        for trial in range(10):
            signal = synthesize_scene(planted_scene(frame_seed(77, trial), kind='sine'), self.array)
            combined = combined_srp_map(signal, self.array, self.grid)
            self.assertEqual(combined.mode_used, MapMode.SRP_CONST)
            const_errors.append(cell_distance(find_peak(combined).cell, TARGET_CELL))
            forced = srp_map(signal, self.array, self.grid, Weighting.PHAT)
            phat_errors.append(cell_distance(find_peak(forced).cell, TARGET_CELL))
        self.assertLessEqual(np.median(const_errors), 2.0)
        self.assertGreater(np.median(phat_errors), np.median(const_errors))

    def test_white_noise_selects_phat(self):
        signal = synthesize_scene(planted_scene(5), self.array)
        self.assertEqual(combined_srp_map(signal, self.array, self.grid).mode_used, MapMode.SRP_PHAT)

    def test_bandwidth_at_threshold_counts_as_wideband(self):
        signal = synthesize_scene(planted_scene(6), self.array)
        self.assertIs(select_weighting(signal, estimate_bandwidth(signal)), Weighting.PHAT)


class FindPeakTests(SimpleTestCase):

    def setUp(self):
        self.grid = SteeringGrid.plane(n_u=6, n_v=5)

    def power_map(self, power):
        return SteeredPowerMap(self.grid, power, MapMode.SRP_PHAT)

    def test_unique_maximum(self):
        power = np.zeros((6, 5))
        power[3, 4] = 2.5
        self.assertEqual(find_peak(self.power_map(power)).cell, (3, 4))

    def test_uniform_map_at_floor_returns_first_cell(self):
        peak = find_peak(self.power_map(np.full((6, 5), 1.5)), floor=1.5)
        self.assertEqual((peak.cell, peak.power), ((0, 0), 1.5))

    def test_below_floor_returns_none(self):
        self.assertIsNone(find_peak(self.power_map(np.zeros((6, 5))), floor=0.1))

    def test_shape_mismatch_is_rejected(self):
        with self.assertRaises(ShapeError):
            self.power_map(np.zeros((5, 6)))


class ColorMapTests(SimpleTestCase):

    def test_extremes_are_blue_and_red(self):
        power = np.zeros((4, 3))
        power[2, 1] = 10.0
        rgb = power_to_rgb(power)
        self.assertEqual(rgb.shape, (3, 4, 3))
        self.assertEqual(tuple(rgb[1, 2]), (255, 0, 0))
        self.assertEqual(tuple(rgb[0, 0]), (0, 0, 255))

    def test_flat_map_renders_blue(self):
        rgb = power_to_rgb(np.ones((2, 2)))
        self.assertTrue(np.all(rgb[..., 2] == 255))

    def test_written_files(self):
        grid = SteeringGrid.plane(n_u=4, n_v=3)
        power_map = SteeredPowerMap(grid, np.arange(12, dtype=float).reshape(4, 3), MapMode.SRP_CONST)
        with tempfile.TemporaryDirectory() as tmp:
            ppm = write_color_map(power_map, Path(tmp) / 'map.ppm')
            self.assertTrue(ppm.read_bytes().startswith(b'P6'))
            payload = json.loads(write_power_matrix(power_map, Path(tmp) / 'map.json').read_text())
        self.assertEqual(payload['mode'], 'SRP_CONST')
        self.assertEqual((payload['n_u'], payload['n_v']), (4, 3))
        self.assertEqual(payload['power'][3][2], 11.0)
