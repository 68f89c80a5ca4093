"""
Three-frame face confirmation, acoustic-map to image registration and the
five-way speaker decision.
"""
import logging
from typing import Optional, Sequence, Tuple

from localization.models import MapPeak, SteeringGrid

from .models import (
    AcousticPeak, ConfirmedFace, FaceObservation, FaceTrack, FusionError, FusionOutcome, GridBoundsError,
    OutcomeKind, Pixel, TRACK_LENGTH, TrackEntry, pixel_distance,
)

logger = logging.getLogger(__name__)

DEFAULT_COLOCATE_FRACTION = 0.10
DEFAULT_PROXIMITY_FRACTION = 0.15


def _confirmation(previous: Sequence[TrackEntry], obs: FaceObservation,
                  proximity_px: float) -> Optional[ConfirmedFace]:
    matches = [entry for entry in previous if not entry.is_gap and entry.label == obs.label]
    if len(previous) == 2 and len(matches) == 2:
        return ConfirmedFace(obs.label, obs.position)
    if any(pixel_distance(entry.position, obs.position) <= proximity_px for entry in matches):
        return ConfirmedFace(obs.label, obs.position)
    return None


def update_face_track(track: FaceTrack, obs: Optional[FaceObservation], proximity_px: float,
                      frame: Optional[int] = None) -> Tuple[FaceTrack, Optional[ConfirmedFace]]:
    """
    Record one frame and report a confirmed face, if any.

    A face is confirmed when the two previous frames carried the same label
    (any position), or when one of them did and lay within proximity_px of
    the current position. A missing observation records a gap.
    """
    if frame is None:
        frame = 0 if track.last_frame is None else track.last_frame + 1
    if track.last_frame is not None and frame <= track.last_frame:
        raise FusionError(f"Frame {frame} does not follow frame {track.last_frame}")

    previous = track.history[-2:]
    if obs is None:
        entry = TrackEntry(frame=frame)
        confirmed = None
    else:
        entry = TrackEntry(frame=frame, label=obs.label, position=obs.position)
        confirmed = _confirmation(previous, obs, proximity_px)

    history = (track.history + (entry,))[-TRACK_LENGTH:]
    if confirmed is not None:
        logger.debug(f"Frame {frame}: confirmed {confirmed.label} at {confirmed.position}")
    return FaceTrack(history=history, confirmed=confirmed), confirmed


def _image_size(image) -> Tuple[float, float]:
    width, height = image
    if width <= 0 or height <= 0:
        raise FusionError(f"Image size must be positive, got {image}")
    return float(width), float(height)


def map_grid_to_pixels(cell, grid: SteeringGrid, image: Tuple[int, int]) -> Pixel:
    """Pixel position of a steering cell center; grid corners land on image corners."""
    i, j = cell
    if not (0 <= i <= grid.n_u - 1 and 0 <= j <= grid.n_v - 1):
        raise GridBoundsError(f"Cell ({i}, {j}) is outside the {grid.n_u}x{grid.n_v} grid")
    width, height = _image_size(image)
    return ((i + 0.5) * width / grid.n_u, (j + 0.5) * height / grid.n_v)


def pixels_to_cell(pixel: Pixel, grid: SteeringGrid, image: Tuple[int, int]) -> Tuple[float, float]:
    width, height = _image_size(image)
    return (pixel[0] * grid.n_u / width - 0.5, pixel[1] * grid.n_v / height - 0.5)


def pixel_to_plane_point(pixel: Pixel, grid: SteeringGrid, image: Tuple[int, int]):
    """3-D point on the steering plane seen at an image pixel."""
    width, height = _image_size(image)
    return grid.point_at(pixel[0] / width, pixel[1] / height)


def plane_point_to_pixels(point, grid: SteeringGrid, image: Tuple[int, int]) -> Pixel:
    width, height = _image_size(image)
    a, b = grid.plane_coordinates(point)
    return (a * width, b * height)


def peak_to_acoustic(peak: Optional[MapPeak], grid: SteeringGrid,
                     image: Tuple[int, int]) -> Optional[AcousticPeak]:
    if peak is None:
        return None
    return AcousticPeak(position=map_grid_to_pixels(peak.cell, grid, image), power=peak.power)


def fuse(acoustic: Optional[AcousticPeak], face: Optional[FaceObservation], colocate_px: float) -> FusionOutcome:
    """
    Combine the acoustic peak and the confirmed face of one frame. A known
    face co-located with the source wins the position; an UNKNOWN face
    co-located with a source is reported as an unknown source.
    """
    if colocate_px <= 0:
        raise FusionError(f"Co-location distance must be positive, got {colocate_px}")

    if acoustic is None:
        if face is None:
            return FusionOutcome(OutcomeKind.NO_RESULT)
        return FusionOutcome(OutcomeKind.FACE_ONLY, speaker_position=face.position,
                             face_identity=face.label, face_position=face.position)

    if face is None:
        return FusionOutcome(OutcomeKind.UNKNOWN_SOURCE, speaker_position=acoustic.position,
                             source_position=acoustic.position)

    near = pixel_distance(acoustic.position, face.position) <= colocate_px
    if face.is_unknown:
        if near:
            return FusionOutcome(OutcomeKind.UNKNOWN_SOURCE, speaker_position=face.position,
                                 source_position=acoustic.position, face_position=face.position)
        return FusionOutcome(OutcomeKind.UNKNOWN_SOURCE, speaker_position=acoustic.position,
                             source_position=acoustic.position)
    if near:
        return FusionOutcome(OutcomeKind.IDENTIFIED_SPEAKER, speaker_position=face.position,
                             face_identity=face.label, source_position=acoustic.position,
                             face_position=face.position)
    return FusionOutcome(OutcomeKind.SOURCE_AND_FACE_SEPARATE, face_identity=face.label,
                         source_position=acoustic.position, face_position=face.position)


def default_colocate_px(image_width: int, fraction: float = DEFAULT_COLOCATE_FRACTION) -> float:
    return fraction * image_width


def default_proximity_px(image_width: int, fraction: float = DEFAULT_PROXIMITY_FRACTION) -> float:
    return fraction * image_width
