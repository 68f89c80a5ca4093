"""
Cascade model files and detection records.
"""
import json
import logging
import math
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from scene_sim.io import flatten_errors

from .models import (
    CascadeModel, Detection, HaarFeature, HaarRect, HaarStage, LbpPosition, LbpStage, WeakClassifier,
    CascadeFormatError,
)
from .serializers import CascadeSerializer

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _float(value: float):
    """JSON has no infinity; stage thresholds of +/-inf are written as strings."""
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return value


def cascade_from_dict(data: dict) -> CascadeModel:
    for stage in data.get('stages', []) if isinstance(data, dict) else []:
        if isinstance(stage, dict) and stage.get('threshold') in ('inf', '-inf'):
            stage['threshold'] = float(stage['threshold'])
    serializer = CascadeSerializer(data=data)
    if not serializer.is_valid():
        raise CascadeFormatError(f"Invalid cascade: {flatten_errors(serializer.errors)}")
    values = serializer.validated_data
    window = tuple(values['base_window'])

    stages = []
    for item in values['stages']:
        if item['type'] == 'haar':
            classifiers = tuple(
                WeakClassifier(
                    feature=HaarFeature(kind=c['feature']['kind'],
                                        rects=tuple(HaarRect(*r) for r in c['feature']['rects']),
                                        window=window),
                    threshold=c['threshold'], parity=int(c['parity']), alpha=c['alpha'],
                )
                for c in item['classifiers']
            )
            stages.append(HaarStage(weak_classifiers=classifiers, threshold=item['threshold']))
        else:
            positions = []
            for p in item['positions']:
                table = np.zeros(256)
                for code, score in p['table'].items():
                    table[int(code)] = score
                positions.append(LbpPosition(x=p['x'], y=p['y'], table=table, block=p['block']))
            stages.append(LbpStage(positions=tuple(positions), threshold=item['threshold']))
    return CascadeModel(stages=tuple(stages), base_window=window, name=values['name'],
                        version=values['version'])


def cascade_to_dict(model: CascadeModel) -> dict:
    stages = []
    for stage in model.stages:
        if isinstance(stage, HaarStage):
            stages.append({
                'type': 'haar',
                'threshold': _float(stage.threshold),
                'classifiers': [
                    {
                        'feature': {
                            'kind': wc.feature.kind,
                            'rects': [[r.x, r.y, r.w, r.h, r.weight] for r in wc.feature.rects],
                        },
                        'threshold': wc.threshold,
                        'parity': wc.parity,
                        'alpha': wc.alpha,
                    }
                    for wc in stage.weak_classifiers
                ],
            })
        else:
            stages.append({
                'type': 'lbp',
                'threshold': _float(stage.threshold),
                'positions': [
                    {
                        'x': p.x,
                        'y': p.y,
                        'block': p.block,
                        'table': {str(code): float(p.table[code]) for code in np.flatnonzero(p.table)},
                    }
                    for p in stage.positions
                ],
            })
    return {
        'version': model.version,
        'name': model.name,
        'base_window': list(model.base_window),
        'stages': stages,
    }


def load_cascade(path: PathLike) -> CascadeModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Cascade file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CascadeFormatError(f"Cascade file {path} is not valid JSON: {e}") from e
    model = cascade_from_dict(data)
    logger.info(f"Loaded cascade '{model.name}' with {len(model.stages)} stage(s) from {path}")
    return model


def save_cascade(model: CascadeModel, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cascade_to_dict(model), indent=2) + '\n')
    return path


def write_detections(detections: Iterable[Detection], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([d.to_record() for d in detections], indent=2) + '\n')
    return path
