"""
Management command to recognize the face in an image with a trained face model.
"""
import json
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from detection.cascade import detect_multiscale
from detection.io import load_cascade
from pipeline.models import BUNDLED_CASCADE, ConfigError
from pipeline.options import command_errors, parse_floats
from recognition.classifier import knn_classify
from recognition.preprocessing import preprocess_face
from recognition.storage import load_model
from scene_sim.io import read_pgm


class Command(BaseCommand):
    help = 'Classify a face as a known identity or UNKNOWN'

    def add_arguments(self, parser):
        parser.add_argument('--image', type=str, required=True, help='Grayscale PGM image')
        parser.add_argument('--face-model', type=str, required=True, help='Face model file')
        parser.add_argument('--box', type=str, help="Face box 'x,y,w,h' (detected when omitted)")
        parser.add_argument('--eyes', type=str, help="Eye positions 'lx,ly,rx,ry' (searched when omitted)")
        parser.add_argument('--cascade', type=str, default=str(BUNDLED_CASCADE), help='Cascade model file')
        parser.add_argument('--knn-k', type=int, default=settings.KNN_K)
        parser.add_argument('--unknown-threshold', type=float, help='Overrides the model threshold')
        parser.add_argument('--out', type=str, help='Write the result as JSON into this directory')

    def handle(self, *args, **options):
        with command_errors():
            image = read_pgm(options['image'])
            model = load_model(options['face_model'])
            if options['box']:
                box = parse_floats(options['box'], 4, 'box')
            else:
                detections = detect_multiscale(image, load_cascade(options['cascade']),
                                               settings.DETECTION_SCALE_FACTOR, settings.DETECTION_STEP,
                                               settings.DETECTION_MIN_NEIGHBORS)
                if not detections:
                    raise ConfigError(f"box: no face detected in {options['image']}; pass --box")
                box = max(detections, key=lambda d: (d.neighbor_count, d.score)).box
            eyes = None
            if options['eyes']:
                lx, ly, rx, ry = parse_floats(options['eyes'], 4, 'eyes')
                eyes = ((lx, ly), (rx, ry))

            face = preprocess_face(image, box, eyes, size=model.image_shape[0])
            result = knn_classify(model, face, options['knn_k'], options['unknown_threshold'], position=box)
            record = {
                'label': result.label,
                'distance': round(result.distance, 6),
                'nearest_label': result.nearest_label,
                'box': [round(v, 3) for v in box],
            }
            if options['out']:
                out = Path(options['out'])
                out.mkdir(parents=True, exist_ok=True)
                (out / 'recognition.json').write_text(json.dumps(record, sort_keys=True) + '\n')

        self.stdout.write(json.dumps(record, sort_keys=True))
        style = self.style.WARNING if result.is_unknown else self.style.SUCCESS
        self.stdout.write(style(f"Recognized {result.label} (distance {result.distance:.4g})"))
