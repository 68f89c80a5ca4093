"""
Scene files, audio export and PGM image I/O.
"""
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from .models import (
    Echo, FaceSprite, GrayImage, MultichannelSignal, SceneDescription, SourceSpec,
    InvalidSceneError,
)
from .serializers import SceneSerializer

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

AUDIO_DTYPE = '<f4'


def flatten_errors(errors, prefix: str = '') -> str:
    """Render DRF validation errors as 'field.path: message' text."""
    if isinstance(errors, dict):
        parts = [flatten_errors(value, f"{prefix}{key}." if key != 'non_field_errors' else prefix)
                 for key, value in errors.items()]
        return '; '.join(p for p in parts if p)
    if isinstance(errors, list):
        if errors and all(isinstance(e, str) for e in errors):
            return f"{prefix.rstrip('.') or 'scene'}: {' '.join(str(e) for e in errors)}"
        parts = [flatten_errors(value, f"{prefix}{index}.") for index, value in enumerate(errors)]
        return '; '.join(p for p in parts if p)
    return f"{prefix.rstrip('.')}: {errors}"


def scene_from_dict(data: dict, base_dir: Path = None) -> SceneDescription:
    serializer = SceneSerializer(data=data)
    if not serializer.is_valid():
        raise InvalidSceneError(f"Invalid scene: {flatten_errors(serializer.errors)}")
    values = serializer.validated_data

    sources = []
    for item in values['sources']:
        sample_path = item.get('sample_file')
        if sample_path and base_dir is not None and not Path(sample_path).is_absolute():
            sample_path = str(base_dir / sample_path)
        sources.append(SourceSpec(
            position=tuple(item['position']),
            signal_kind=item['signal_kind'],
            level=item['level'],
            frequency=item.get('frequency'),
            sample_path=sample_path,
            echoes=tuple(Echo(e['delay_s'], e['gain']) for e in item.get('echoes', [])),
        ))
    sprites = tuple(
        FaceSprite(identity=s['identity'], x=s['position'][0], y=s['position'][1],
                   scale=s['scale'], rotation=s['rotation'])
        for s in values['face_sprites']
    )
    return SceneDescription(
        sources=tuple(sources),
        snr_db=values['snr_db'],
        seed=values['seed'],
        face_sprites=sprites,
        speed_of_sound=values['speed_of_sound'],
        noise_power=values.get('noise_power'),
    )


def load_scene(path: PathLike) -> SceneDescription:
    """Read and validate a JSON scene file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Scene file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InvalidSceneError(f"Scene file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise InvalidSceneError(f"Scene file {path} must hold a JSON object")
    scene = scene_from_dict(data, base_dir=path.parent)
    logger.info(f"Loaded scene {path} with {len(scene.sources)} source(s) and {len(scene.face_sprites)} sprite(s)")
    return scene


def scene_to_dict(scene: SceneDescription) -> dict:
    return {
        'sources': [
            {
                'position': list(s.position),
                'signal_kind': s.signal_kind,
                'level': s.level,
                'frequency': s.frequency,
                'sample_file': s.sample_path,
                'echoes': [{'delay_s': e.delay_s, 'gain': e.gain} for e in s.echoes],
            }
            for s in scene.sources
        ],
        'snr_db': scene.snr_db,
        'seed': scene.seed,
        'face_sprites': [
            {'identity': s.identity, 'position': [s.x, s.y], 'scale': s.scale, 'rotation': s.rotation}
            for s in scene.face_sprites
        ],
        'speed_of_sound': scene.speed_of_sound,
        'noise_power': scene.noise_power,
    }


def write_audio(signal: MultichannelSignal, path: PathLike) -> Path:
    """Interleaved float32 little-endian samples plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    interleaved = np.ascontiguousarray(signal.channels.T, dtype=AUDIO_DTYPE)
    path.write_bytes(interleaved.tobytes())
    sidecar = {
        'sample_rate': signal.sample_rate,
        'channels': signal.channel_count,
        'samples': signal.length,
        'dtype': 'float32le',
    }
    sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True, indent=2) + '\n')
    return path


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + '.json')


def read_audio(path: PathLike) -> MultichannelSignal:
    path = Path(path)
    meta_path = sidecar_path(path)
    for required in (path, meta_path):
        if not required.exists():
            raise FileNotFoundError(f"Audio file not found: {required}")
    meta = json.loads(meta_path.read_text())
    data = np.frombuffer(path.read_bytes(), dtype=AUDIO_DTYPE)
    channels = int(meta['channels'])
    if channels < 1 or data.size % channels:
        raise InvalidSceneError(f"Audio file {path} does not hold {channels} interleaved channels")
    return MultichannelSignal(sample_rate=float(meta['sample_rate']),
                              channels=data.reshape(-1, channels).T.astype(float))


def write_pgm(image: GrayImage, path: PathLike) -> Path:
    """Binary PGM (P5)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image.pixels).save(path, format='PPM')
    return path


def read_pgm(path: PathLike) -> GrayImage:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image file not found: {path}")
    with Image.open(path) as img:
        return GrayImage(np.array(img.convert('L'), dtype=np.uint8))
