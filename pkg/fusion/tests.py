import itertools
import math

import numpy as np
from django.test import SimpleTestCase

from localization.models import MapPeak, SteeringGrid
from recognition.models import UNKNOWN, RecognitionResult

from .decision import (
    default_colocate_px, fuse, map_grid_to_pixels, peak_to_acoustic, pixel_to_plane_point,
    pixels_to_cell, plane_point_to_pixels, update_face_track,
)
from .models import (
    AcousticPeak, FaceObservation, FaceTrack, FusionError, FusionOutcome, GridBoundsError, OutcomeKind,
)

PROXIMITY = 50.0
COLOCATE = 64.0
SPOTS = {'near': (200.0, 150.0), 'far': (420.0, 150.0)}


def expected_confirmations(sequence):
    """Per-step confirmation for (label, spot) observations; spots share a position or lie far apart."""
    expected = []
    for index, (label, spot) in enumerate(sequence):
        previous = sequence[max(0, index - 2):index]
        same_label = [p for p in previous if p[0] == label]
        rule_a = len(previous) == 2 and len(same_label) == 2
        rule_b = any(p[1] == spot for p in same_label)
        expected.append(rule_a or rule_b)
    return expected


def expected_outcome(acoustic, face):
    """The five-way decision written out case by case."""
    if acoustic is None and face is None:
        return OutcomeKind.NO_RESULT, None, None
    if acoustic is None:
        return OutcomeKind.FACE_ONLY, face.position, face.label
    if face is None:
        return OutcomeKind.UNKNOWN_SOURCE, acoustic.position, None
    near = math.dist(acoustic.position, face.position) <= COLOCATE
    if face.label == UNKNOWN:
        return OutcomeKind.UNKNOWN_SOURCE, face.position if near else acoustic.position, None
    if near:
        return OutcomeKind.IDENTIFIED_SPEAKER, face.position, face.label
    return OutcomeKind.SOURCE_AND_FACE_SEPARATE, None, face.label


class FaceTrackTests(SimpleTestCase):

    def run_sequence(self, sequence):
        track = FaceTrack()
        confirmations = []
        for label, spot in sequence:
            track, confirmed = update_face_track(track, FaceObservation(label, SPOTS[spot]), PROXIMITY)
            confirmations.append(confirmed is not None)
            if confirmed is not None:
                self.assertEqual((confirmed.label, confirmed.position), (label, SPOTS[spot]))
        return confirmations

    def test_all_three_frame_sequences(self):
        steps = list(itertools.product(('alice', 'bob'), ('near', 'far')))
        cases = list(itertools.product(steps, repeat=3))
        self.assertEqual(len(cases), 64)
        for sequence in cases:
            with self.subTest(sequence=sequence):
                self.assertEqual(self.run_sequence(list(sequence)), expected_confirmations(list(sequence)))

    def test_history_keeps_last_three_frames(self):
        track = FaceTrack()
        for _ in range(5):
            track, _ = update_face_track(track, FaceObservation('alice', (10, 10)), PROXIMITY)
        self.assertEqual([entry.frame for entry in track.history], [2, 3, 4])

    def test_gap_breaks_same_label_rule(self):
        track = FaceTrack()
        track, _ = update_face_track(track, FaceObservation('alice', SPOTS['near']), PROXIMITY)
        track, _ = update_face_track(track, None, PROXIMITY)
        track, confirmed = update_face_track(track, FaceObservation('alice', SPOTS['far']), PROXIMITY)
        self.assertIsNone(confirmed)
        self.assertTrue(track.history[1].is_gap)
        track, confirmed = update_face_track(track, FaceObservation('alice', SPOTS['near']), PROXIMITY)
        self.assertIsNone(confirmed)
        track, confirmed = update_face_track(track, FaceObservation('alice', SPOTS['near']), PROXIMITY)
        self.assertEqual(confirmed.label, 'alice')

    def test_unknown_faces_confirm_like_any_label(self):
        track = FaceTrack()
        track, _ = update_face_track(track, FaceObservation(UNKNOWN, (30, 30)), PROXIMITY)
        _, confirmed = update_face_track(track, FaceObservation(UNKNOWN, (35, 30)), PROXIMITY)
        self.assertEqual(confirmed.label, UNKNOWN)

    def test_frames_must_increase(self):
        track, _ = update_face_track(FaceTrack(), FaceObservation('alice', (0, 0)), PROXIMITY, frame=4)
        with self.assertRaises(FusionError):
            update_face_track(track, FaceObservation('alice', (0, 0)), PROXIMITY, frame=4)
        with self.assertRaises(FusionError):
            FaceTrack(history=track.history * 2)


class FuseTests(SimpleTestCase):

    def lattice(self):
        source = (320.0, 240.0)
        acoustics = [None, AcousticPeak(source, 5.0)]
        faces = [None]
        directions = [(1.0, 0.0), (0.0, 1.0), (-0.6, 0.8), (-0.8, -0.6)]
        distances = [0.0, 1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 63.0, 63.9, 64.1, 65.0, 70.0, 80.0, 128.0, 300.0]
        for label in ('alice', UNKNOWN):
            for (dx, dy), d in itertools.product(directions, distances):
                faces.append(FaceObservation(label, (source[0] + d * dx, source[1] + d * dy)))
        return list(itertools.product(acoustics, faces))

    def test_decision_table(self):
        cases = self.lattice()
        self.assertGreaterEqual(len(cases), 200)
        for acoustic, face in cases:
            with self.subTest(acoustic=acoustic, face=face):
                outcome = fuse(acoustic, face, COLOCATE)
                kind, speaker, identity = expected_outcome(acoustic, face)
                self.assertEqual(outcome.kind, kind)
                self.assertEqual(outcome.speaker_position, speaker)
                self.assertEqual(outcome.face_identity, identity)
                if acoustic is not None:
                    self.assertEqual(outcome.source_position, acoustic.position)

    def test_colocation_boundary_is_inclusive(self):
        acoustic = AcousticPeak((100.0, 100.0), 1.0)
        outcome = fuse(acoustic, FaceObservation('bob', (164.0, 100.0)), COLOCATE)
        self.assertEqual(outcome.kind, OutcomeKind.IDENTIFIED_SPEAKER)
        self.assertEqual(outcome.speaker_position, (164.0, 100.0))

    def test_separate_outcome_keeps_both_positions(self):
        outcome = fuse(AcousticPeak((0, 0), 1.0), FaceObservation('carol', (200, 0)), COLOCATE)
        self.assertEqual(outcome.kind, OutcomeKind.SOURCE_AND_FACE_SEPARATE)
        self.assertEqual((outcome.source_position, outcome.face_position), ((0.0, 0.0), (200.0, 0.0)))
        self.assertIsNone(outcome.speaker_position)

    def test_colocate_distance_must_be_positive(self):
        with self.assertRaises(FusionError):
            fuse(None, None, 0.0)

    def test_outcome_invariants(self):
        with self.assertRaises(FusionError):
            FusionOutcome(OutcomeKind.IDENTIFIED_SPEAKER, speaker_position=(1, 2))
        with self.assertRaises(FusionError):
            FusionOutcome(OutcomeKind.SOURCE_AND_FACE_SEPARATE, face_identity='a',
                          source_position=(1, 2), face_position=(1, 2))

    def test_record_field_order(self):
        outcome = fuse(AcousticPeak((10.0, 20.0), 1.0), FaceObservation('alice', (12.34567, 20.0)), COLOCATE)
        record = outcome.to_record(3)
        self.assertEqual(list(record), ['frame', 'kind', 'identity', 'speaker_xy', 'source_xy', 'face_xy'])
        self.assertEqual(record['speaker_xy'], [12.346, 20.0])
        self.assertEqual(fuse(None, None, COLOCATE).to_record(0), {'frame': 0, 'kind': 'NO_RESULT'})

    def test_observation_from_recognition(self):
        result = RecognitionResult('alice', 1.5, position=(10, 20, 40, 40))
        self.assertEqual(FaceObservation.from_recognition(result), FaceObservation('alice', (30.0, 40.0)))
        self.assertIsNone(FaceObservation.from_recognition(RecognitionResult('alice', 1.5)))
        self.assertEqual(default_colocate_px(640), 64.0)


class RegistrationTests(SimpleTestCase):

    def setUp(self):
        self.grid = SteeringGrid.plane(n_u=64, n_v=48)
        self.image = (640, 480)

    def test_corner_cells(self):
        self.assertEqual(map_grid_to_pixels((0, 0), self.grid, self.image), (5.0, 5.0))
        self.assertEqual(map_grid_to_pixels((63, 47), self.grid, self.image), (635.0, 475.0))

    def test_interior_cell_matches_affine_form(self):
        for cell in [(17, 30), (40, 20), (5, 44)]:
            i, j = cell
            expected = (10.0 * i + 5.0, 10.0 * j + 5.0)
            np.testing.assert_allclose(map_grid_to_pixels(cell, self.grid, self.image), expected)
            np.testing.assert_allclose(pixels_to_cell(expected, self.grid, self.image), cell, atol=1e-9)
            center = self.grid.cell_center(i, j)
            np.testing.assert_allclose(plane_point_to_pixels(center, self.grid, self.image), expected, atol=1e-9)
            np.testing.assert_allclose(pixel_to_plane_point(expected, self.grid, self.image), center, atol=1e-12)

    def test_cells_outside_grid(self):
        for cell in [(-1, 0), (64, 0), (0, 48)]:
            with self.assertRaises(GridBoundsError):
                map_grid_to_pixels(cell, self.grid, self.image)

    def test_peak_to_acoustic(self):
        self.assertIsNone(peak_to_acoustic(None, self.grid, self.image))
        acoustic = peak_to_acoustic(MapPeak((1, 2), 7.5), self.grid, self.image)
        self.assertEqual((acoustic.position, acoustic.power), ((15.0, 25.0), 7.5))
