"""
Face model files: versioned JSON with arrays stored as little-endian float64 hex.

Serialization is deterministic: the same model always yields the same bytes.
"""
import json
import logging
import math
from pathlib import Path
from typing import Union

import numpy as np

from scene_sim.io import flatten_errors

from .models import EigenModel, FisherModel, LbphModel, ModelFormatError
from .serializers import ARRAY_DTYPE, FaceModelSerializer

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
MODEL_VERSION = 1
FaceModel = Union[EigenModel, FisherModel, LbphModel]


def encode_array(values) -> dict:
    array = np.ascontiguousarray(values, dtype=ARRAY_DTYPE)
    return {'dtype': ARRAY_DTYPE, 'shape': list(array.shape), 'hex': array.tobytes().hex()}


def decode_array(data: dict) -> np.ndarray:
    return np.frombuffer(bytes.fromhex(data['hex']), dtype=ARRAY_DTYPE).reshape(data['shape']).astype(float)


def model_to_dict(model: FaceModel) -> dict:
    threshold = model.unknown_threshold
    data = {
        'version': MODEL_VERSION,
        'kind': model.kind,
        'image_shape': [int(v) for v in model.image_shape],
        'class_names': list(model.class_names),
        'gallery_labels': [int(v) for v in model.gallery_labels],
        'unknown_threshold': None if math.isinf(threshold) else float(threshold),
        'params': {},
        'arrays': {'gallery': encode_array(model.gallery)},
    }
    if isinstance(model, EigenModel):
        data['params'] = {'dropped_leading': model.dropped_leading}
        data['arrays'].update(mean=encode_array(model.mean), eigenfaces=encode_array(model.eigenfaces),
                              eigenvalues=encode_array(model.eigenvalues))
    elif isinstance(model, FisherModel):
        data['arrays'].update(mean=encode_array(model.mean), projection=encode_array(model.projection),
                              class_means=encode_array(model.class_means))
    else:
        data['params'] = {
            'neighbors': model.neighbors,
            'radius': model.radius,
            'grid': list(model.grid),
            'uniform': model.uniform,
            'interpolation': model.interpolation,
            'block_size': model.block_size,
        }
    return data


def model_from_dict(data: dict) -> FaceModel:
    serializer = FaceModelSerializer(data=data)
    if not serializer.is_valid():
        raise ModelFormatError(f"Invalid face model: {flatten_errors(serializer.errors)}")
    valid = serializer.validated_data
    arrays = {name: decode_array(value) for name, value in valid['arrays'].items()}
    threshold = valid['unknown_threshold']
    common = dict(
        gallery=arrays['gallery'],
        gallery_labels=np.array(valid['gallery_labels'], dtype=np.int64),
        class_names=tuple(valid['class_names']),
        image_shape=tuple(valid['image_shape']),
        unknown_threshold=math.inf if threshold is None else float(threshold),
    )
    kind = valid['kind']
    if kind == 'eigen':
        return EigenModel(mean=arrays['mean'], eigenfaces=arrays['eigenfaces'].reshape(-1, arrays['mean'].size),
                          eigenvalues=arrays['eigenvalues'],
                          dropped_leading=int(valid['params'].get('dropped_leading', 0)), **common)
    if kind == 'fisher':
        components = arrays['projection'].reshape(-1, arrays['mean'].size).shape[0]
        return FisherModel(mean=arrays['mean'],
                           projection=arrays['projection'].reshape(components, -1),
                           class_means=arrays['class_means'].reshape(-1, components), **common)
    params = valid['params']
    return LbphModel(neighbors=params['neighbors'], radius=float(params['radius']), grid=tuple(params['grid']),
                     uniform=params['uniform'], interpolation=params['interpolation'],
                     block_size=params['block_size'], **common)


def dumps_model(model: FaceModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, sort_keys=True) + '\n'


def save_model(model: FaceModel, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_model(model), encoding='utf-8')
    logger.info(f"Saved {model.kind} face model to {path}")
    return path


def load_model(path: PathLike) -> FaceModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Face model not found: {path}")
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"Face model {path} is not valid JSON: {e}")
    model = model_from_dict(data)
    logger.info(f"Loaded {model.kind} face model from {path} ({model.gallery.shape[0]} gallery entries)")
    return model
