"""
Shared command-line options, scenario config assembly and error-to-exit-code
translation for the management commands.
"""
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Tuple

import yaml
from django.conf import settings
from django.core.management.base import CommandError
from rest_framework import serializers

from detection.models import CascadeFormatError, DetectionError
from fusion.models import FusionError
from localization.models import LocalizationError, SteeringGrid, SteeringGridError
from recognition.models import ModelFormatError, RecognitionError
from scene_sim.geometry import build_double_ring_array
from scene_sim.io import flatten_errors
from scene_sim.models import InvalidGeometryError, InvalidSceneError, MicArray, SceneError

from .models import (
    ArrayParams, BUNDLED_CASCADE, ConfigError, FrameProcessingError, GridParams, MODEL_KINDS, MODES,
    ScenarioConfig, ScenarioError,
)
from .serializers import ScenarioConfigSerializer

logger = logging.getLogger(__name__)

EXIT_BAD_CONFIG = 2
EXIT_IO_FAILURE = 3
EXIT_PROCESSING_FAILURE = 4

ARRAY_FIELDS = ('inner_diameter', 'outer_diameter', 'n_inner', 'n_outer', 'angular_offset')


def parse_array_flag(text: str) -> dict:
    """'inner,outer,n_inner,n_outer[,offset_rad]' -> array params."""
    parts = [p.strip() for p in str(text).split(',')]
    if len(parts) not in (4, 5):
        raise ConfigError(f"array: expected 'inner,outer,n_inner,n_outer[,offset]', got '{text}'")
    try:
        values = [float(parts[0]), float(parts[1]), int(parts[2]), int(parts[3])]
        if len(parts) == 5:
            values.append(float(parts[4]))
    except ValueError:
        raise ConfigError(f"array: cannot parse '{text}'")
    return dict(zip(ARRAY_FIELDS, values))


def parse_grid_flag(text: str) -> dict:
    """'64x48' -> grid cell counts."""
    try:
        n_u, n_v = (int(v) for v in str(text).lower().split('x'))
    except ValueError:
        raise ConfigError(f"grid: expected cell counts like '64x48', got '{text}'")
    return {'n_u': n_u, 'n_v': n_v}


def parse_floats(text: str, count: int, name: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(v) for v in str(text).split(','))
    except ValueError:
        raise ConfigError(f"{name}: cannot parse '{text}'")
    if len(values) != count:
        raise ConfigError(f"{name}: expected {count} comma-separated numbers, got '{text}'")
    return values


def read_config_file(path) -> dict:
    """YAML or JSON config (JSON is valid YAML)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding='utf-8'))
    except yaml.YAMLError as e:
        raise ConfigError(f"config: {path} is not valid YAML/JSON: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config: {path} must hold a mapping of options")
    return data


def _resolve(value, base_dir: Optional[Path]) -> Optional[Path]:
    if value in (None, ''):
        return None
    path = Path(value)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return path


def build_config(data: Optional[dict] = None, overrides: Optional[dict] = None,
                 base_dir: Optional[Path] = None) -> ScenarioConfig:
    """
    Merge file values with flag overrides (flags win), validate, and fill the
    rest from settings. Relative file paths resolve against base_dir; flag
    paths are taken as given.
    """
    data = dict(data or {})
    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
    for nested in ('array', 'grid'):
        if nested in overrides:
            merged = dict(data.get(nested) or {})
            merged.update(overrides.pop(nested))
            data[nested] = merged

    serializer = ScenarioConfigSerializer(data={**data, **overrides})
    if not serializer.is_valid():
        raise ConfigError(f"Invalid scenario config: {flatten_errors(serializer.errors)}")
    values = serializer.validated_data

    def path_of(key):
        return _resolve(values.get(key), None if key in overrides else base_dir)

    scene = path_of('scene')
    if scene is None:
        raise ConfigError('scene: a scene file is required')
    array = {
        'inner_diameter': settings.ARRAY_INNER_DIAMETER_M,
        'outer_diameter': settings.ARRAY_OUTER_DIAMETER_M,
        'n_inner': settings.ARRAY_INNER_COUNT,
        'n_outer': settings.ARRAY_OUTER_COUNT,
        **(values.get('array') or {}),
    }
    grid = {
        'n_u': settings.GRID_CELLS_U,
        'n_v': settings.GRID_CELLS_V,
        'distance': settings.GRID_DISTANCE_M,
        'half_width': settings.GRID_HALF_WIDTH_M,
        'half_height': settings.GRID_HALF_HEIGHT_M,
        **(values.get('grid') or {}),
    }
    image_size = values.get('image_size') or (settings.IMAGE_WIDTH, settings.IMAGE_HEIGHT)

    config = ScenarioConfig(
        scene=scene,
        out=path_of('out') or Path(settings.OUTPUT_ROOT),
        array=ArrayParams(**array),
        grid=GridParams(**grid),
        cascade=path_of('cascade') or BUNDLED_CASCADE,
        face_model=path_of('face_model'),
        frames=values.get('frames', 10),
        seed=values.get('seed', settings.DEFAULT_SEED),
        mode=values.get('mode', 'auto'),
        components=values.get('components', settings.EIGEN_COMPONENTS),
        knn_k=values.get('knn_k', settings.KNN_K),
        unknown_threshold=values.get('unknown_threshold'),
        model_kind=values.get('model_kind', 'eigen'),
        identities=tuple(values.get('identities', ('alice', 'bob', 'carol'))),
        images_per_identity=values.get('images_per_identity', 8),
        image_size=(int(image_size[0]), int(image_size[1])),
        sample_rate=values.get('sample_rate', float(settings.DEFAULT_SAMPLE_RATE)),
        frame_length=values.get('frame_length', settings.FRAME_LENGTH),
        bandwidth_threshold=values.get('bandwidth_threshold', settings.BANDWIDTH_THRESHOLD_HZ),
        scale_factor=values.get('scale_factor', settings.DETECTION_SCALE_FACTOR),
        detection_step=values.get('detection_step', settings.DETECTION_STEP),
        min_neighbors=values.get('min_neighbors', settings.DETECTION_MIN_NEIGHBORS),
        colocate_fraction=values.get('colocate_fraction', settings.COLOCATE_FRACTION),
        proximity_fraction=values.get('proximity_fraction', settings.PROXIMITY_FRACTION),
        talk_floor_factor=values.get('talk_floor_factor', settings.TALK_FLOOR_FACTOR),
        workers=values.get('workers', settings.PIPELINE_WORKERS),
        annotate=values.get('annotate', False),
    )
    logger.debug(f"Scenario config: {config}")
    return config


def build_array(params: ArrayParams) -> MicArray:
    return build_double_ring_array(params.inner_diameter, params.outer_diameter, params.n_inner,
                                   params.n_outer, params.angular_offset)


def build_grid(params: GridParams) -> SteeringGrid:
    return SteeringGrid.plane(distance=params.distance, half_width=params.half_width,
                              half_height=params.half_height, n_u=params.n_u, n_v=params.n_v)


def add_scenario_arguments(parser):
    """Flags that mirror scenario config keys; unset flags leave the config alone."""
    parser.add_argument('--scene', type=str, help='Scene file (JSON)')
    parser.add_argument('--array', type=str, help="Double-ring array 'inner,outer,n_inner,n_outer[,offset]'")
    parser.add_argument('--grid', type=str, help="Steering grid cells, e.g. '64x48'")
    parser.add_argument('--cascade', type=str, help='Cascade model file (defaults to the bundled toy cascade)')
    parser.add_argument('--face-model', type=str, help='Face model file (trained on the fly when omitted)')
    parser.add_argument('--frames', type=int, help='Number of frames to process')
    parser.add_argument('--seed', type=int, help=f"Seed for all randomness (default {settings.DEFAULT_SEED})")
    parser.add_argument('--out', type=str, help='Output directory')
    parser.add_argument('--mode', choices=MODES, help='Beamformer weighting: phat, const or auto')
    parser.add_argument('--components', type=int, help='Subspace components for on-the-fly training')
    parser.add_argument('--knn-k', type=int, help='Neighbors in the k-NN vote')
    parser.add_argument('--unknown-threshold', type=float, help='Distance above which a face is UNKNOWN')
    parser.add_argument('--model-kind', choices=MODEL_KINDS, help='Face model family for on-the-fly training')
    parser.add_argument('--workers', type=int, help='Frame worker threads')
    parser.add_argument('--annotate', action='store_true', default=None,
                        help='Also write camera frames blended with the color map')


def scenario_overrides(options: dict) -> dict:
    overrides = {
        'scene': options.get('scene'),
        'cascade': options.get('cascade'),
        'face_model': options.get('face_model'),
        'frames': options.get('frames'),
        'seed': options.get('seed'),
        'out': options.get('out'),
        'mode': options.get('mode'),
        'components': options.get('components'),
        'knn_k': options.get('knn_k'),
        'unknown_threshold': options.get('unknown_threshold'),
        'model_kind': options.get('model_kind'),
        'workers': options.get('workers'),
        'annotate': options.get('annotate'),
    }
    if options.get('array'):
        overrides['array'] = parse_array_flag(options['array'])
    if options.get('grid'):
        overrides['grid'] = parse_grid_flag(options['grid'])
    return overrides


@contextmanager
def command_errors():
    """Translate domain errors into CommandError exit codes 2, 3 and 4."""
    try:
        yield
    except CommandError:
        raise
    except FileNotFoundError as e:
        raise CommandError(str(e), returncode=EXIT_IO_FAILURE)
    except FrameProcessingError as e:
        raise CommandError(str(e), returncode=EXIT_PROCESSING_FAILURE)
    except (ConfigError, InvalidSceneError, InvalidGeometryError, SteeringGridError, CascadeFormatError,
            ModelFormatError, serializers.ValidationError) as e:
        raise CommandError(str(e), returncode=EXIT_BAD_CONFIG)
    except OSError as e:
        raise CommandError(f"I/O failure: {e}", returncode=EXIT_IO_FAILURE)
    except (SceneError, LocalizationError, DetectionError, RecognitionError, FusionError,
            ScenarioError, ValueError) as e:
        raise CommandError(f"Processing failed: {e}", returncode=EXIT_PROCESSING_FAILURE)
