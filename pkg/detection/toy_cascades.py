"""
Hand-built cascades matched to the synthetic face sprites.

On the 24x24 base window a sprite's eyes sit at (7.2, 8.4) and (16.8, 8.4)
with radius 1.7, so rows 6-10 form a dark eye band between a bright
forehead and bright cheeks.
"""
import numpy as np

from .models import CascadeModel, HaarFeature, HaarRect, HaarStage, LbpPosition, LbpStage, WeakClassifier

FEATURE_THRESHOLD = 1.5

EYE_BAND = (4, 6, 16, 4)
CHEEKS = (4, 10, 16, 4)
FOREHEAD = (4, 2, 16, 4)


def _pair(kind: str, bright, dark) -> HaarFeature:
    return HaarFeature(kind=kind, rects=(HaarRect(*bright, 1), HaarRect(*dark, -1)))


def cheeks_below_eyes() -> WeakClassifier:
    """Cheeks brighter than the eye band: f > threshold."""
    return WeakClassifier(_pair('two_v', CHEEKS, EYE_BAND), threshold=FEATURE_THRESHOLD, parity=-1)


def eyes_beside_bridge() -> WeakClassifier:
    """Both eye cells darker than the nose bridge between them: f < -threshold."""
    feature = HaarFeature(kind='three_h', rects=(
        HaarRect(3, 6, 6, 4, 1), HaarRect(9, 6, 6, 4, -2), HaarRect(15, 6, 6, 4, 1),
    ))
    return WeakClassifier(feature, threshold=-FEATURE_THRESHOLD, parity=1)


def forehead_above_eyes() -> WeakClassifier:
    """Forehead brighter than the eye band: f > threshold."""
    return WeakClassifier(_pair('two_v', FOREHEAD, EYE_BAND), threshold=FEATURE_THRESHOLD, parity=-1)


def build_toy_face_cascade() -> CascadeModel:
    """Three single-feature Haar stages."""
    stages = tuple(
        HaarStage(weak_classifiers=(wc,), threshold=1.0)
        for wc in (cheeks_below_eyes(), eyes_beside_bridge(), forehead_above_eyes())
    )
    return CascadeModel(stages=stages, name='toy-haar-face')


def _dark_top_table() -> np.ndarray:
    """Score 1 for codes whose top neighbor (bit 6) is darker than the center."""
    codes = np.arange(256)
    return ((codes >> 6) & 1 == 0).astype(float)


def build_toy_lbp_cascade() -> CascadeModel:
    """
    One multi-block LBP stage: the cheek block under each eye must see a
    darker block above it.
    """
    table = _dark_top_table()
    stage = LbpStage(positions=(
        LbpPosition(x=3, y=7, table=table, block=3),
        LbpPosition(x=12, y=7, table=table, block=3),
    ), threshold=2.0)
    return CascadeModel(stages=(stage,), name='toy-lbp-face')
