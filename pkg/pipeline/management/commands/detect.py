"""
Management command to run a cascade face detector over an image.
"""
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from detection.cascade import detect_multiscale
from detection.io import load_cascade, write_detections
from pipeline.models import BUNDLED_CASCADE
from pipeline.options import command_errors
from scene_sim.io import load_scene, read_pgm
from scene_sim.sprites import render_synthetic_frame


class Command(BaseCommand):
    help = 'Detect faces with a Haar or LBP cascade'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--image', type=str, help='Grayscale PGM image')
        source.add_argument('--scene', type=str, help='Scene file whose frame is rendered')
        parser.add_argument('--cascade', type=str, default=str(BUNDLED_CASCADE), help='Cascade model file')
        parser.add_argument('--scale-factor', type=float, default=settings.DETECTION_SCALE_FACTOR)
        parser.add_argument('--step', type=int, default=settings.DETECTION_STEP)
        parser.add_argument('--min-neighbors', type=int, default=settings.DETECTION_MIN_NEIGHBORS)
        parser.add_argument('--out', type=str, default=str(Path(settings.OUTPUT_ROOT) / 'detect'),
                            help='Output directory')

    def handle(self, *args, **options):
        with command_errors():
            cascade = load_cascade(options['cascade'])
            if options['image']:
                image = read_pgm(options['image'])
            else:
                image = render_synthetic_frame(load_scene(options['scene']),
                                               settings.IMAGE_WIDTH, settings.IMAGE_HEIGHT).image
            detections = detect_multiscale(image, cascade, options['scale_factor'], options['step'],
                                           options['min_neighbors'])
            path = write_detections(detections, Path(options['out']) / 'detections.json')

        for detection in detections:
            self.stdout.write(f"  box {detection.box} neighbors {detection.neighbor_count}")
        self.stdout.write(self.style.SUCCESS(f"{len(detections)} face(s) detected; written to {path}"))
