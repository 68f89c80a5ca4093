"""
End-to-end scenario runner: synthesize -> localize -> detect -> recognize ->
track -> fuse, with artifacts written under the output directory.

The per-frame stage is pure and runs on a bounded thread pool; the face
track and fusion run sequentially in frame order through a reorder buffer.
"""
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from detection.cascade import detect_multiscale
from detection.io import load_cascade
from fusion.decision import fuse, peak_to_acoustic, plane_point_to_pixels, update_face_track
from fusion.models import FaceObservation, FaceTrack, pixel_distance
from localization.beamformer import combined_srp_map, find_peak, srp_map
from localization.colormap import write_color_map, write_overlay
from localization.models import MapMode, SteeredPowerMap, Weighting
from recognition.classifier import calibrate_unknown_threshold, knn_classify, with_threshold
from recognition.datasets import synthesize_face_dataset
from recognition.lbph import train_lbph
from recognition.models import PreprocessingError
from recognition.preprocessing import preprocess_face
from recognition.storage import load_model
from recognition.subspace import train_eigenfaces, train_fisherfaces
from scene_sim.io import load_scene
from scene_sim.sprites import render_synthetic_frame
from scene_sim.synthesis import frame_seed, scene_noise_power, silence_like, synthesize_scene

from .models import ArtifactPathError, FrameProcessingError, FrameResult, ScenarioConfig, ScenarioSummary
from .options import build_array, build_grid

logger = logging.getLogger(__name__)

# Frame index reserved for the silence frame that calibrates the talk floor.
CALIBRATION_FRAME = 0xCA11B


def train_face_model(kind: str, identities, images_per_identity: int, components: int, seed: int,
                     unknown_threshold: Optional[float] = None):
    """Train a face model on synthetic sprites and attach its unknown threshold."""
    data = synthesize_face_dataset(identities, images_per_identity, seed=seed)
    if kind == 'fisher':
        model = train_fisherfaces(data, components)
    elif kind == 'lbph':
        model = train_lbph(data)
    else:
        model = train_eigenfaces(data, components)
    threshold = calibrate_unknown_threshold(model) if unknown_threshold is None else unknown_threshold
    return with_threshold(model, threshold)


class ScenarioRunner:
    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.out = Path(config.out).resolve()
        self.scene = None
        self.cascade = None
        self.face_model = None
        self.array = build_array(config.array)
        self.grid = build_grid(config.grid)
        self.floors: Dict[MapMode, float] = {}

    @property
    def duration(self) -> float:
        return self.config.frame_length / self.config.sample_rate

    @property
    def image_width(self) -> int:
        return self.config.image_size[0]

    def artifact_path(self, *parts) -> Path:
        path = self.out.joinpath(*parts).resolve()
        if path != self.out and self.out not in path.parents:
            raise ArtifactPathError(f"Artifact path {path} escapes the output directory {self.out}")
        return path

    def prepare(self):
        """Load inputs, train or load the face model, and calibrate the talk floor."""
        config = self.config
        self.scene = load_scene(config.scene)
        self.cascade = load_cascade(config.cascade)
        if config.face_model is not None:
            model = load_model(config.face_model)
            if config.unknown_threshold is not None:
                model = with_threshold(model, config.unknown_threshold)
            self.face_model = model
        else:
            self.face_model = train_face_model(config.model_kind, config.identities, config.images_per_identity,
                                               config.components, config.seed, config.unknown_threshold)
        self.floors = self.calibrate_floors()

    def _map(self, signal) -> SteeredPowerMap:
        mode = self.config.mode
        c = self.scene.speed_of_sound
        if mode == 'auto':
            return combined_srp_map(signal, self.array, self.grid, self.config.bandwidth_threshold, c)
        weighting = Weighting.PHAT if mode == 'phat' else Weighting.CONST
        return srp_map(signal, self.array, self.grid, weighting, c)

    def calibrate_floors(self) -> Dict[MapMode, float]:
        """
        Talk floor per weighting: a multiple of the median map power of a
        source-free frame at the scene's noise level.
        """
        scene = replace(self.scene, seed=frame_seed(self.config.seed, 0))
        noise_power = scene_noise_power(scene, self.array, self.config.sample_rate, self.duration)
        silence = silence_like(scene, noise_power, frame_seed(self.config.seed, CALIBRATION_FRAME))
        signal = synthesize_scene(silence, self.array, self.config.sample_rate, self.duration)
        floors = {}
        for weighting in (Weighting.PHAT, Weighting.CONST):
            power = srp_map(signal, self.array, self.grid, weighting, self.scene.speed_of_sound).power
            floors[MapMode.for_weighting(weighting)] = self.config.talk_floor_factor * float(np.median(power))
        logger.info('Talk floors: ' + ', '.join(f"{mode.value}={value:.4g}" for mode, value in floors.items()))
        return floors

    def source_pixel(self, scene) -> Optional[tuple]:
        if not scene.sources:
            return None
        return plane_point_to_pixels(scene.sources[0].position, self.grid, self.config.image_size)

    def process_frame(self, index: int) -> FrameResult:
        """Pure per-frame stage; safe to run concurrently."""
        config = self.config
        scene = replace(self.scene, seed=frame_seed(config.seed, index))
        signal = synthesize_scene(scene, self.array, config.sample_rate, self.duration)
        frame = render_synthetic_frame(scene, *config.image_size)

        power_map = self._map(signal)
        peak = find_peak(power_map, self.floors.get(power_map.mode_used, 0.0))
        acoustic = peak_to_acoustic(peak, self.grid, config.image_size)

        detections = tuple(detect_multiscale(frame.image, self.cascade, config.scale_factor,
                                             config.detection_step, config.min_neighbors))
        recognition = None
        if detections:
            best = max(detections, key=lambda d: (d.neighbor_count, d.score, -d.y, -d.x))
            try:
                face = preprocess_face(frame.image, best.box, size=self.face_model.image_shape[0])
                recognition = knn_classify(self.face_model, face, config.knn_k, position=best.box)
            except PreprocessingError as e:
                logger.warning(f"Frame {index}: skipping face at {best.box}: {e}")

        return FrameResult(index=index, power_map=power_map, peak=peak, acoustic=acoustic,
                           detections=detections, recognition=recognition, image=frame.image,
                           source_xy=self.source_pixel(scene))

    def _emit(self, result: FrameResult, track: FaceTrack, summary: ScenarioSummary, records) -> FaceTrack:
        config = self.config
        proximity = config.proximity_fraction * self.image_width
        colocate = config.colocate_fraction * self.image_width
        track, confirmed = update_face_track(track, FaceObservation.from_recognition(result.recognition),
                                             proximity, frame=result.index)
        face = FaceObservation(confirmed.label, confirmed.position) if confirmed is not None else None
        outcome = fuse(result.acoustic, face, colocate)

        write_color_map(result.power_map, self.artifact_path('frames', f"frame_{result.index:04d}_map.ppm"))
        if config.annotate:
            write_overlay(result.image.pixels, result.power_map,
                          self.artifact_path('frames', f"frame_{result.index:04d}_annotated.ppm"),
                          boxes=[d.box for d in result.detections],
                          speaker_xy=outcome.speaker_position, label=outcome.face_identity)

        records.write(json.dumps(outcome.to_record(result.index)) + '\n')
        summary.outcomes.append(outcome)
        summary.kind_counts[outcome.kind.value] = summary.kind_counts.get(outcome.kind.value, 0) + 1
        if result.acoustic is not None and result.source_xy is not None:
            summary.localization_errors_px.append(pixel_distance(result.acoustic.position, result.source_xy))
        logger.debug(f"Frame {result.index}: {outcome.kind.value}")
        return track

    def run(self) -> ScenarioSummary:
        """
        Process every frame and write maps, outcome records and the summary.
        Raises FrameProcessingError naming the first failed frame after all
        other frames were written.
        """
        config = self.config
        if self.scene is None:
            self.prepare()
        self.artifact_path('frames').mkdir(parents=True, exist_ok=True)
        summary = ScenarioSummary(frames=config.frames)
        errors = {}
        pending = {}
        track = FaceTrack()
        next_index = 0
        started = time.perf_counter()

        with open(self.artifact_path('outcomes.jsonl'), 'w', encoding='utf-8') as records, \
                ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
            futures = {pool.submit(self.process_frame, index): index for index in range(config.frames)}
            for future in as_completed(futures):
                index = futures[future]
                try:
                    pending[index] = future.result()
                except Exception as e:
                    logger.warning(f"Frame {index} failed: {e}")
                    errors[index] = e
                    pending[index] = None
                while next_index in pending:
                    result = pending.pop(next_index)
                    if result is not None:
                        track = self._emit(result, track, summary, records)
                    next_index += 1

        summary.failed_frames = sorted(errors)
        summary.elapsed_s = time.perf_counter() - started
        summary_path = self.artifact_path('summary.json')
        summary_path.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
        logger.info(f"Scenario finished: {config.frames} frame(s), {summary.frames_per_second:.2f} frames/s, "
                    f"outcomes {summary.kind_counts}")
        if summary.failed_frames:
            first = summary.first_failure
            raise FrameProcessingError(first, str(errors[first]))
        return summary
