"""
Cascade evaluation, multi-scale sliding-window detection and merging of
overlapping detections.
"""
import logging
from typing import List, Sequence, Tuple

import numpy as np

from .features import (
    block_lbp_codes, feature_extent, integral_image, lbp_position_extent, weak_votes, check_window,
)
from .models import (
    CascadeModel, CascadeVerdict, Detection, HaarStage, IntegralImage, Stage, BoundsError, DetectionError,
)

logger = logging.getLogger(__name__)

DEFAULT_SCALE_FACTOR = 1.1
DEFAULT_STEP = 2
DEFAULT_MIN_NEIGHBORS = 3
MERGE_IOU = 0.3


def evaluate_stage(table: np.ndarray, xs: np.ndarray, ys: np.ndarray, scale: float,
                   stage: Stage) -> np.ndarray:
    """Stage score for every window origin (xs[k], ys[k])."""
    if isinstance(stage, HaarStage):
        scores = np.zeros(np.shape(xs))
        for wc in stage.weak_classifiers:
            scores += wc.alpha * weak_votes(table, xs, ys, scale, wc)
        return scores
    scores = np.zeros(np.shape(xs))
    for position in stage.positions:
        scores += position.table[block_lbp_codes(table, xs, ys, scale, position)]
    return scores


def stage_extent(stage: Stage, scale: float) -> Tuple[int, int]:
    if isinstance(stage, HaarStage):
        extents = [feature_extent(wc.feature, scale) for wc in stage.weak_classifiers]
    else:
        extents = [lbp_position_extent(position, scale) for position in stage.positions]
    return (max([0] + [e[0] for e in extents]), max([0] + [e[1] for e in extents]))


def model_extent(model: CascadeModel, scale: float) -> Tuple[int, int]:
    """Reach of the scaled window and every scaled feature from the window origin."""
    right = int(round(model.base_window[0] * scale))
    bottom = int(round(model.base_window[1] * scale))
    for stage in model.stages:
        sr, sb = stage_extent(stage, scale)
        right, bottom = max(right, sr), max(bottom, sb)
    return right, bottom


def stage_score(ii: IntegralImage, origin: Tuple[int, int], scale: float, stage: Stage) -> float:
    xs, ys = np.array([origin[0]]), np.array([origin[1]])
    return float(evaluate_stage(ii.table, xs, ys, scale, stage)[0])


def run_cascade(ii: IntegralImage, window_origin: Tuple[int, int], scale: float,
                model: CascadeModel) -> CascadeVerdict:
    """
    Evaluate stages in order and stop at the first stage whose score is
    below its threshold.
    """
    check_window(ii, window_origin, scale, model.base_window)
    right, bottom = model_extent(model, scale)
    if window_origin[0] + right > ii.width or window_origin[1] + bottom > ii.height:
        raise BoundsError(f"Cascade features leave the image at {window_origin}, scale {scale:.3f}")

    for index, stage in enumerate(model.stages):
        if stage_score(ii, window_origin, scale, stage) < stage.threshold:
            return CascadeVerdict(accepted=False, rejected_stage=index, stages_evaluated=index + 1)
    return CascadeVerdict(accepted=True, rejected_stage=None, stages_evaluated=len(model.stages))


def cascade_scales(image_size: Tuple[int, int], base_window: Tuple[int, int],
                   scale_factor: float = DEFAULT_SCALE_FACTOR) -> List[float]:
    """Scales scale_factor**k for which the base window still fits the image."""
    if scale_factor <= 1:
        raise DetectionError(f"Scale factor must exceed 1, got {scale_factor}")
    width, height = image_size
    scales = []
    k = 0
    while True:
        scale = scale_factor ** k
        if base_window[0] * scale > width or base_window[1] * scale > height:
            return scales
        scales.append(scale)
        k += 1


def scan_scale(ii: IntegralImage, model: CascadeModel, scale: float, step: int) -> List[Detection]:
    """Accepted windows at one scale."""
    right, bottom = model_extent(model, scale)
    if right > ii.width or bottom > ii.height:
        return []
    stride = max(1, int(round(step * scale)))
    grid_y, grid_x = np.mgrid[0:ii.height - bottom + 1:stride, 0:ii.width - right + 1:stride]
    xs, ys = grid_x.ravel(), grid_y.ravel()
    scores = np.zeros(xs.shape)
    for stage in model.stages:
        if xs.size == 0:
            break
        scores = evaluate_stage(ii.table, xs, ys, scale, stage)
        keep = scores >= stage.threshold
        xs, ys, scores = xs[keep], ys[keep], scores[keep]

    w = int(round(model.base_window[0] * scale))
    h = int(round(model.base_window[1] * scale))
    return [Detection(float(x), float(y), float(w), float(h), score=float(s))
            for x, y, s in zip(xs, ys, scores)]


def detect_multiscale(img, model: CascadeModel, scale_factor: float = DEFAULT_SCALE_FACTOR,
                      step: int = DEFAULT_STEP, min_neighbors: int = DEFAULT_MIN_NEIGHBORS) -> List[Detection]:
    """Slide the cascade over every scale, then merge overlapping hits."""
    if scale_factor <= 1:
        raise DetectionError(f"Scale factor must exceed 1, got {scale_factor}")
    ii = integral_image(img)
    raw = []
    for scale in cascade_scales((ii.width, ii.height), model.base_window, scale_factor):
        raw.extend(scan_scale(ii, model, scale, step))
    merged = merge_detections(raw, min_neighbors)
    logger.debug(f"{len(raw)} raw windows merged into {len(merged)} detection(s)")
    return merged


def box_iou(a: Sequence[float], b: Sequence[float]) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    ih = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def pairwise_iou(boxes: np.ndarray) -> np.ndarray:
    """IoU matrix of (x, y, w, h) rows."""
    x1, y1 = boxes[:, 0], boxes[:, 1]
    x2, y2 = x1 + boxes[:, 2], y1 + boxes[:, 3]
    iw = np.clip(np.minimum(x2[:, None], x2[None, :]) - np.maximum(x1[:, None], x1[None, :]), 0, None)
    ih = np.clip(np.minimum(y2[:, None], y2[None, :]) - np.maximum(y1[:, None], y1[None, :]), 0, None)
    inter = iw * ih
    areas = boxes[:, 2] * boxes[:, 3]
    union = areas[:, None] + areas[None, :] - inter
    return np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)


def cluster_detections(raw: Sequence[Detection], min_iou: float = MERGE_IOU) -> List[List[int]]:
    """
    Greedy clique clustering in descending score order: a box joins the first
    cluster whose every member overlaps it with IoU >= min_iou, otherwise it
    starts a new cluster. Returns member indices into `raw`.
    """
    if not raw:
        return []
    boxes = np.array([d.box for d in raw], dtype=float)
    linked = pairwise_iou(boxes) >= min_iou
    order = sorted(range(len(raw)), key=lambda k: (-raw[k].score, raw[k].y, raw[k].x, k))
    clusters: List[List[int]] = []
    for index in order:
        for members in clusters:
            if linked[index, members].all():
                members.append(index)
                break
        else:
            clusters.append([index])
    return clusters


def merge_detections(raw: Sequence[Detection], min_neighbors: int = DEFAULT_MIN_NEIGHBORS) -> List[Detection]:
    """
    Replace every cluster of mutually overlapping boxes (pairwise IoU >= 0.3)
    holding at least min_neighbors boxes with its mean box.
    """
    merged = []
    for members in cluster_detections(raw):
        if len(members) < max(1, min_neighbors):
            continue
        boxes = np.array([raw[k].box for k in members], dtype=float)
        x, y, w, h = boxes.mean(axis=0)
        score = float(np.mean([raw[k].score for k in members]))
        merged.append(Detection(float(x), float(y), float(w), float(h), score=score,
                                neighbor_count=len(members)))
    merged.sort(key=lambda d: (d.y, d.x))
    return merged
