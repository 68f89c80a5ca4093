"""
Scenario configuration, per-frame results and run summaries.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from detection.models import Detection
from fusion.models import AcousticPeak, FusionOutcome
from localization.models import MapPeak, SteeredPowerMap
from recognition.models import RecognitionResult

BUNDLED_CASCADE = Path(__file__).resolve().parent.parent / 'detection' / 'cascades' / 'toy_haar_face.json'
MODES = ('phat', 'const', 'auto')
MODEL_KINDS = ('eigen', 'fisher', 'lbph')


class ScenarioError(Exception):
    """Base exception for scenario runs."""
    pass


class ConfigError(ScenarioError, ValueError):
    pass


class FrameProcessingError(ScenarioError):
    def __init__(self, frame: int, message: str):
        self.frame = frame
        super().__init__(f"Frame {frame} failed: {message}")


class ArtifactPathError(ScenarioError):
    pass


@dataclass(frozen=True)
class ArrayParams:
    inner_diameter: float = 0.2
    outer_diameter: float = 0.4
    n_inner: int = 7
    n_outer: int = 9
    angular_offset: float = 0.0


@dataclass(frozen=True)
class GridParams:
    n_u: int = 64
    n_v: int = 48
    distance: float = 2.0
    half_width: float = 1.5
    half_height: float = 1.125


@dataclass(frozen=True)
class ScenarioConfig:
    scene: Path
    out: Path
    array: ArrayParams = ArrayParams()
    grid: GridParams = GridParams()
    cascade: Path = BUNDLED_CASCADE
    face_model: Optional[Path] = None
    frames: int = 10
    seed: int = 42
    mode: str = 'auto'
    components: int = 30
    knn_k: int = 1
    unknown_threshold: Optional[float] = None
    model_kind: str = 'eigen'
    identities: Tuple[str, ...] = ('alice', 'bob', 'carol')
    images_per_identity: int = 8
    image_size: Tuple[int, int] = (640, 480)
    sample_rate: float = 32000.0
    frame_length: int = 4096
    bandwidth_threshold: float = 4000.0
    scale_factor: float = 1.1
    detection_step: int = 2
    min_neighbors: int = 3
    colocate_fraction: float = 0.10
    proximity_fraction: float = 0.15
    talk_floor_factor: float = 3.0
    workers: int = 2
    annotate: bool = False


@dataclass(frozen=True, eq=False)
class FrameResult:
    """Output of the parallel per-frame stage."""
    index: int
    power_map: SteeredPowerMap
    peak: Optional[MapPeak]
    acoustic: Optional[AcousticPeak]
    detections: Tuple[Detection, ...]
    recognition: Optional[RecognitionResult]
    image: object  # GrayImage
    source_xy: Optional[Tuple[float, float]] = None


@dataclass
class ScenarioSummary:
    frames: int
    kind_counts: Dict[str, int] = field(default_factory=dict)
    localization_errors_px: List[float] = field(default_factory=list)
    failed_frames: List[int] = field(default_factory=list)
    outcomes: List[FusionOutcome] = field(default_factory=list)
    elapsed_s: float = 0.0

    @property
    def first_failure(self) -> Optional[int]:
        return min(self.failed_frames) if self.failed_frames else None

    @property
    def frames_per_second(self) -> float:
        processed = self.frames - len(self.failed_frames)
        return processed / self.elapsed_s if self.elapsed_s > 0 else 0.0

    def to_dict(self) -> dict:
        """Deterministic summary; timings are left out so reruns compare equal."""
        errors = np.asarray(self.localization_errors_px, dtype=float)
        stats = None
        if errors.size:
            stats = {
                'count': int(errors.size),
                'median': round(float(np.median(errors)), 3),
                'mean': round(float(errors.mean()), 3),
                'max': round(float(errors.max()), 3),
            }
        return {
            'frames': self.frames,
            'kind_counts': dict(sorted(self.kind_counts.items())),
            'localization_error_px': stats,
            'failed_frames': sorted(self.failed_frames),
        }
