import itertools
import json
import math
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import linprog

from scene_sim.models import FaceSprite, GrayImage, SceneDescription
from scene_sim.sprites import render_synthetic_frame

from .cascade import (
    box_iou, cascade_scales, cluster_detections, detect_multiscale, merge_detections, run_cascade, stage_score,
)
from .features import (
    count_haar_features, enumerate_haar_features, eval_weak_classifier, integral_image, lbp_code,
    lbp_code_map, lbp_stage_score, lbp_uniformity, rect_sum,
)
from .io import cascade_from_dict, cascade_to_dict, load_cascade, write_detections
from .models import (
    CascadeModel, Detection, HaarFeature, HaarRect, HaarStage, LbpPosition, LbpStage, WeakClassifier,
    BoundsError, CascadeFormatError,
)
from .toy_cascades import build_toy_face_cascade, build_toy_lbp_cascade

BUNDLED_CASCADE = Path(__file__).resolve().parent / 'cascades' / 'toy_haar_face.json'


def eye_band_window():
    """24x24 window: bright face, two dark eye cells on rows 6-9."""
    pixels = np.full((24, 24), 200, dtype=np.uint8)
    pixels[6:10, 3:9] = 50
    pixels[6:10, 15:21] = 50
    return pixels


def two_rect_feature():
    return HaarFeature(kind='two_h', rects=(HaarRect(0, 0, 12, 24, 1), HaarRect(12, 0, 12, 24, -1)))


def inside_hull(point, points):
    """Whether point is a convex combination of points."""
    points = np.asarray(points, dtype=float)
    a_eq = np.vstack([points.T, np.ones(len(points))])
    b_eq = np.array([point[0], point[1], 1.0])
    result = linprog(np.zeros(len(points)), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method='highs')
    return result.status == 0


class IntegralImageTests(SimpleTestCase):

    def test_all_ones(self):
        ii = integral_image(np.ones((4, 4), dtype=np.uint8))
        self.assertEqual(ii.table[-1, -1], 16)
        self.assertEqual(rect_sum(ii, 1, 0, 3, 2), 6)

    def test_every_rect_matches_naive_sum(self):
        for seed in range(10):
            pixels = np.random.default_rng(seed).integers(0, 256, size=(8, 8))
            ii = integral_image(pixels)
            for y in range(8):
                for x in range(8):
                    for h in range(1, 9 - y):
                        for w in range(1, 9 - x):
                            naive = sum(int(pixels[r, c]) for r in range(y, y + h) for c in range(x, x + w))
                            self.assertEqual(rect_sum(ii, x, y, w, h), naive)

    def test_full_frame_and_single_pixel(self):
        pixels = np.random.default_rng(1).integers(0, 256, size=(5, 7))
        ii = integral_image(GrayImage(pixels.astype(np.uint8)))
        self.assertEqual(rect_sum(ii, 0, 0, 7, 5), int(pixels.sum()))
        self.assertEqual(rect_sum(ii, 3, 2, 1, 1), int(pixels[2, 3]))

    def test_out_of_bounds_rect(self):
        ii = integral_image(np.zeros((4, 4), dtype=np.uint8))
        with self.assertRaises(BoundsError):
            rect_sum(ii, 2, 2, 3, 1)


class HaarFeatureTests(SimpleTestCase):

    def test_tiny_windows(self):
        self.assertEqual(enumerate_haar_features((1, 1)), [])
        self.assertEqual(len(enumerate_haar_features((2, 2), kinds=('two_h', 'two_v'))), 6)

    def test_base_window_count(self):
        self.assertEqual(count_haar_features((24, 24)), 162336)
        self.assertGreater(count_haar_features((24, 24)), 160000)

    def test_enumeration_matches_closed_form(self):
        for window in [(6, 5), (9, 7), (12, 12)]:
            self.assertEqual(len(enumerate_haar_features(window)), count_haar_features(window))

    def test_unbalanced_feature_is_rejected(self):
        with self.assertRaises(CascadeFormatError):
            HaarFeature(kind='custom', rects=(HaarRect(0, 0, 2, 2, 1), HaarRect(2, 0, 1, 2, -1)))

    def test_weak_classifier_on_uniform_image(self):
        ii = integral_image(np.full((24, 24), 90, dtype=np.uint8))
        feature = two_rect_feature()
        self.assertEqual(eval_weak_classifier(ii, (0, 0), 1.0, WeakClassifier(feature, 0.1, 1)), 1)
        self.assertEqual(eval_weak_classifier(ii, (0, 0), 1.0, WeakClassifier(feature, 0.1, -1)), 0)

    def test_weak_classifier_on_two_tone_window(self):
        pixels = np.full((24, 24), 100, dtype=np.uint8)
        pixels[:, :12] = 106  # f = 3
        ii = integral_image(pixels)
        feature = two_rect_feature()
        self.assertEqual(eval_weak_classifier(ii, (0, 0), 1.0, WeakClassifier(feature, 5.0, 1)), 1)
        self.assertEqual(eval_weak_classifier(ii, (0, 0), 1.0, WeakClassifier(feature, 2.0, 1)), 0)

    def test_scaled_feature_leaving_image(self):
        ii = integral_image(np.zeros((30, 30), dtype=np.uint8))
        with self.assertRaises(BoundsError):
            eval_weak_classifier(ii, (10, 10), 1.0, WeakClassifier(two_rect_feature(), 0.0, 1))


class CascadeTests(SimpleTestCase):

    def test_empty_cascade_accepts(self):
        ii = integral_image(np.zeros((24, 24), dtype=np.uint8))
        verdict = run_cascade(ii, (0, 0), 1.0, CascadeModel())
        self.assertTrue(verdict.accepted)
        self.assertEqual(verdict.stages_evaluated, 0)

    def test_infinite_first_threshold_rejects(self):
        stage = HaarStage(weak_classifiers=(WeakClassifier(two_rect_feature(), 0.0, 1),), threshold=math.inf)
        ii = integral_image(eye_band_window())
        verdict = run_cascade(ii, (0, 0), 1.0, CascadeModel(stages=(stage,)))
        self.assertFalse(verdict.accepted)
        self.assertEqual(verdict.rejected_stage, 0)

    def test_noise_windows_are_rejected_early(self):
        model = build_toy_face_cascade()
        rng = np.random.default_rng(21)
        evaluated = []
        for _ in range(1000):
            window = rng.integers(0, 256, size=(24, 24)).astype(np.uint8)
            evaluated.append(run_cascade(integral_image(window), (0, 0), 1.0, model).stages_evaluated)
        self.assertLess(np.mean(evaluated), 1.5)

    def test_no_stage_runs_after_a_rejection(self):
        model = build_toy_face_cascade()
        rng = np.random.default_rng(22)
        windows = [eye_band_window(), 255 - eye_band_window()]
        windows += [rng.integers(0, 256, size=(24, 24)).astype(np.uint8) for _ in range(50)]
        for index, window in enumerate(windows):
            with self.subTest(window=index):
                with mock.patch('detection.cascade.stage_score', wraps=stage_score) as scored:
                    verdict = run_cascade(integral_image(window), (0, 0), 1.0, model)
                self.assertEqual(scored.call_count, verdict.stages_evaluated)
                if not verdict.accepted:
                    self.assertEqual(verdict.stages_evaluated, verdict.rejected_stage + 1)
                    last_stage = scored.call_args_list[-1].args[3]
                    self.assertIs(last_stage, model.stages[verdict.rejected_stage])

    def test_toy_cascade_on_eye_band_and_inversion(self):
        model = CascadeModel(stages=build_toy_face_cascade().stages[:2])
        window = eye_band_window()
        self.assertTrue(run_cascade(integral_image(window), (0, 0), 1.0, model).accepted)
        verdict = run_cascade(integral_image(255 - window), (0, 0), 1.0, model)
        self.assertEqual((verdict.accepted, verdict.rejected_stage), (False, 0))

    def test_scale_count(self):
        for size in [(24, 24), (100, 60), (200, 160), (640, 480)]:
            expected = math.floor(math.log(min(size) / 24) / math.log(1.1)) + 1
            self.assertEqual(len(cascade_scales(size, (24, 24), 1.1)), expected)

    def test_small_image_gives_no_detections(self):
        self.assertEqual(detect_multiscale(np.zeros((20, 30), dtype=np.uint8), build_toy_face_cascade()), [])

    def test_planted_sprite_is_detected(self):
        scene = SceneDescription(seed=3, face_sprites=(FaceSprite('alice', 100.0, 80.0, 1.0),))
        frame = render_synthetic_frame(scene, 200, 160)
        detections = detect_multiscale(frame.image, build_toy_face_cascade(), 1.1, 1, 3)
        self.assertTrue(detections)
        best = max(detections, key=lambda d: (d.neighbor_count, d.score))
        x, y, w, h = frame.sprites[0].box
        iw = min(best.x + best.w, x + w) - max(best.x, x)
        ih = min(best.y + best.h, y + h) - max(best.y, y)
        self.assertGreaterEqual(max(iw, 0) * max(ih, 0) / (w * h), 0.5)

    def test_background_gives_no_detections(self):
        frame = render_synthetic_frame(SceneDescription(seed=3), 200, 160)
        self.assertEqual(detect_multiscale(frame.image, build_toy_face_cascade(), 1.1, 1, 3), [])

    def test_toy_lbp_cascade_accepts_sprite_window(self):
        scene = SceneDescription(seed=5, face_sprites=(FaceSprite('bob', 48.0, 48.0, 1.5),))
        frame = render_synthetic_frame(scene, 96, 96)
        verdict = run_cascade(integral_image(frame.image), (0, 0), 4.0, build_toy_lbp_cascade())
        self.assertTrue(verdict.accepted)


class MergeTests(SimpleTestCase):

    def test_identical_boxes_merge(self):
        merged = merge_detections([Detection(5, 5, 10, 10), Detection(5, 5, 10, 10)], 2)
        self.assertEqual(len(merged), 1)
        self.assertEqual(merged[0].box, (5.0, 5.0, 10.0, 10.0))
        self.assertEqual(merged[0].neighbor_count, 2)

    def test_disjoint_boxes_stay(self):
        merged = merge_detections([Detection(0, 0, 10, 10), Detection(50, 50, 10, 10)], 1)
        self.assertEqual([d.box for d in merged], [(0.0, 0.0, 10.0, 10.0), (50.0, 50.0, 10.0, 10.0)])

    def test_cluster_mean(self):
        raw = [Detection(10, 10, 20, 20), Detection(12, 12, 20, 20), Detection(14, 10, 20, 20)]
        merged = merge_detections(raw, 3)
        self.assertEqual(len(merged), 1)
        np.testing.assert_allclose(merged[0].box, (12.0, 32 / 3, 20.0, 20.0))

    def test_small_clusters_are_dropped(self):
        self.assertEqual(merge_detections([Detection(0, 0, 10, 10)], 2), [])

    def test_chained_boxes_split_into_overlapping_clusters(self):
        raw = [Detection(8 * k, 0, 20, 20) for k in range(6)]
        merged = merge_detections(raw, 1)
        self.assertEqual([d.box for d in merged],
                         [(4.0, 0.0, 20.0, 20.0), (20.0, 0.0, 20.0, 20.0), (36.0, 0.0, 20.0, 20.0)])
        self.assertEqual([d.neighbor_count for d in merged], [2, 2, 2])

    def test_higher_scores_seed_clusters(self):
        raw = [Detection(0, 0, 20, 20, score=1.0), Detection(8, 0, 20, 20, score=5.0),
               Detection(16, 0, 20, 20, score=2.0)]
        clusters = cluster_detections(raw)
        self.assertEqual(clusters, [[1, 2], [0]])

    def test_clusters_are_mutually_overlapping(self):
        rng = np.random.default_rng(23)
        for trial in range(20):
            anchors = rng.uniform(0, 200, size=(4, 2))
            raw = []
            for k in range(40):
                ax, ay = anchors[k % 4]
                size = rng.uniform(18, 30)
                raw.append(Detection(ax + rng.normal(0, 6), ay + rng.normal(0, 6), size, size,
                                     score=float(rng.uniform(0, 3))))
            clusters = cluster_detections(raw)
            merged = merge_detections(raw, 2)
            with self.subTest(trial=trial):
                self.assertEqual(sorted(k for members in clusters for k in members), list(range(len(raw))))
                self.assertLessEqual(len(merged), len(raw))
                for members in clusters:
                    for a, b in itertools.combinations(members, 2):
                        self.assertGreaterEqual(box_iou(raw[a].box, raw[b].box), 0.3)
                for detection in merged:
                    members = [m for m in clusters
                               if len(m) >= 2 and np.allclose(np.mean([raw[k].box for k in m], axis=0),
                                                              detection.box)]
                    self.assertTrue(members)
                    self.assertTrue(inside_hull(detection.center, [raw[k].center for k in members[0]]))


class LbpTests(SimpleTestCase):

    def test_codes_for_simple_patches(self):
        self.assertEqual(lbp_code(np.full((3, 3), 7), 1, 1), 255)
        center_high = np.full((3, 3), 10)
        center_high[1, 1] = 20
        self.assertEqual(lbp_code(center_high, 1, 1), 0)
        top_left = np.full((3, 3), 10)
        top_left[1, 1] = 20
        top_left[0, 0] = 30
        self.assertEqual(lbp_code(top_left, 1, 1), 128)

    def test_border_pixel_is_rejected(self):
        with self.assertRaises(BoundsError):
            lbp_code(np.zeros((3, 3)), 0, 1)

    def test_code_map_matches_single_codes(self):
        pixels = np.random.default_rng(2).integers(0, 256, size=(6, 7))
        codes = lbp_code_map(pixels)
        self.assertEqual(codes.shape, (4, 5))
        for n in range(1, 5):
            for m in range(1, 6):
                self.assertEqual(codes[n - 1, m - 1], lbp_code(pixels, n, m))

    def test_monotone_tone_curves_keep_codes(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            pixels = rng.integers(0, 256, size=(16, 16))
            reference = lbp_code_map(pixels)
            for _ in range(20):
                curve = np.cumsum(rng.integers(1, 5, size=256))
                np.testing.assert_array_equal(lbp_code_map(curve[pixels]), reference)

    def test_uniformity(self):
        self.assertEqual(lbp_uniformity(0b00000000), 0)
        self.assertEqual(lbp_uniformity(0b00001111), 2)
        self.assertEqual(lbp_uniformity(0b01010101), 8)

    def test_stage_score_sums_table_values(self):
        def position(code, value):
            table = np.zeros(256)
            table[code] = value
            return LbpPosition(0, 0, table)

        self.assertEqual(lbp_stage_score([3], LbpStage((LbpPosition(0, 0, np.zeros(256)),), 0.0)), 0.0)
        self.assertAlmostEqual(lbp_stage_score([9], LbpStage((position(9, 0.7),), 0.0)), 0.7)
        stage = LbpStage((position(1, 0.2), position(2, 0.5), position(3, 0.1)), 0.0)
        self.assertAlmostEqual(lbp_stage_score([1, 2, 3], stage), 0.8)

    def test_stage_score_needs_one_code_per_position(self):
        with self.assertRaises(BoundsError):
            lbp_stage_score([1, 2], LbpStage((LbpPosition(0, 0, np.zeros(256)),), 0.0))


class CascadeFileTests(SimpleTestCase):

    def test_bundled_cascade_is_the_toy_face_cascade(self):
        self.assertEqual(cascade_to_dict(load_cascade(BUNDLED_CASCADE)), cascade_to_dict(build_toy_face_cascade()))

    def test_lbp_cascade_survives_dict_form(self):
        model = build_toy_lbp_cascade()
        self.assertEqual(cascade_to_dict(cascade_from_dict(cascade_to_dict(model))), cascade_to_dict(model))

    def test_malformed_cascades(self):
        bad = [
            {'version': 2, 'base_window': [24, 24], 'stages': []},
            {'version': 1, 'base_window': [24], 'stages': []},
            {'version': 1, 'base_window': [24, 24], 'stages': [{'type': 'haar', 'threshold': 1.0}]},
        ]
        for data in bad:
            with self.subTest(data=data):
                with self.assertRaises(CascadeFormatError):
                    cascade_from_dict(data)

    def test_missing_cascade_file(self):
        with self.assertRaises(FileNotFoundError):
            load_cascade('/nonexistent/cascade.json')

    def test_detection_records(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_detections([Detection(1.0, 2.0, 24.0, 24.0, 0.5, 4)], Path(tmp) / 'out' / 'detections.json')
            records = json.loads(path.read_text())
        self.assertEqual(records, [{'x': 1.0, 'y': 2.0, 'w': 24.0, 'h': 24.0, 'score': 0.5, 'neighbors': 4}])
