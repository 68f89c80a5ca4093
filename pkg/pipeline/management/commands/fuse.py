"""
Management command to fuse one acoustic peak with one confirmed face.
"""
import json

from django.conf import settings
from django.core.management.base import BaseCommand

from fusion.decision import fuse
from fusion.models import AcousticPeak, FaceObservation
from pipeline.models import ConfigError
from pipeline.options import command_errors, parse_floats


def parse_face(text: str) -> FaceObservation:
    """'LABEL@x,y' -> face observation."""
    label, sep, position = str(text).rpartition('@')
    if not sep or not label:
        raise ConfigError(f"face: expected 'LABEL@x,y', got '{text}'")
    return FaceObservation(label=label, position=parse_floats(position, 2, 'face'))


def parse_acoustic(text: str) -> AcousticPeak:
    """'x,y' or 'x,y,power' -> acoustic peak."""
    parts = str(text).split(',')
    values = parse_floats(text, len(parts), 'acoustic')
    if len(values) not in (2, 3):
        raise ConfigError(f"acoustic: expected 'x,y[,power]', got '{text}'")
    return AcousticPeak(position=values[:2], power=values[2] if len(values) == 3 else 1.0)


class Command(BaseCommand):
    help = 'Combine an acoustic peak and a face into a speaker outcome'

    def add_arguments(self, parser):
        parser.add_argument('--acoustic', type=str, help="Acoustic peak pixel 'x,y[,power]'")
        parser.add_argument('--face', type=str, help="Confirmed face 'LABEL@x,y' (label may be UNKNOWN)")
        parser.add_argument('--colocate-px', type=float,
                            default=settings.COLOCATE_FRACTION * settings.IMAGE_WIDTH,
                            help='Maximum source-to-face distance for co-location')
        parser.add_argument('--frame', type=int, default=0)

    def handle(self, *args, **options):
        with command_errors():
            acoustic = parse_acoustic(options['acoustic']) if options['acoustic'] else None
            face = parse_face(options['face']) if options['face'] else None
            outcome = fuse(acoustic, face, options['colocate_px'])
        self.stdout.write(json.dumps(outcome.to_record(options['frame'])))
