"""
Management command to train a face model on synthetic sprites and report
training time, model size and query time.
"""
import time
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from pipeline.options import command_errors
from recognition.classifier import calibrate_unknown_threshold, knn_classify, with_threshold
from recognition.datasets import DEFAULT_IDENTITIES, synthesize_face_dataset
from recognition.lbph import train_lbph
from recognition.storage import dumps_model, save_model
from recognition.subspace import train_eigenfaces, train_fisherfaces


class Command(BaseCommand):
    help = 'Train an Eigenface, Fisherface or LBPH face model'

    def add_arguments(self, parser):
        parser.add_argument('--kind', choices=['eigen', 'fisher', 'lbph'], default='eigen')
        parser.add_argument('--identities', type=str, default=','.join(DEFAULT_IDENTITIES),
                            help='Comma-separated identity names')
        parser.add_argument('--images-per-identity', type=int, default=8)
        parser.add_argument('--components', type=int, default=settings.EIGEN_COMPONENTS)
        parser.add_argument('--drop-leading', type=int, default=0, help='Eigenfaces to skip at the top')
        parser.add_argument('--seed', type=int, default=settings.DEFAULT_SEED)
        parser.add_argument('--unknown-threshold', type=float, help='Fixed threshold instead of calibration')
        parser.add_argument('--out', type=str, default=str(Path(settings.OUTPUT_ROOT) / 'face_model.json'),
                            help='Model file to write')

    def handle(self, *args, **options):
        with command_errors():
            identities = [name.strip() for name in options['identities'].split(',') if name.strip()]
            data = synthesize_face_dataset(identities, options['images_per_identity'], seed=options['seed'],
                                           size=settings.FACE_SIZE)

            started = time.perf_counter()
            if options['kind'] == 'fisher':
                model = train_fisherfaces(data, options['components'])
            elif options['kind'] == 'lbph':
                model = train_lbph(data)
            else:
                model = train_eigenfaces(data, options['components'], options['drop_leading'])
            training_s = time.perf_counter() - started

            threshold = options['unknown_threshold']
            model = with_threshold(model, calibrate_unknown_threshold(model) if threshold is None else threshold)
            path = save_model(model, options['out'])
            size = len(dumps_model(model).encode('utf-8'))

            started = time.perf_counter()
            for image in data.images:
                knn_classify(model, image)
            query_ms = 1000.0 * (time.perf_counter() - started) / data.size

        self.stdout.write(f"Model kind:        {model.kind}")
        self.stdout.write(f"Training images:   {data.size} ({data.class_count} identities)")
        self.stdout.write(f"Training time:     {training_s:.3f} s")
        self.stdout.write(f"Model size:        {size} bytes")
        self.stdout.write(f"Query time:        {query_ms:.2f} ms per face")
        self.stdout.write(f"Unknown threshold: {model.unknown_threshold:.4g}")
        self.stdout.write(self.style.SUCCESS(f"Face model written to {path}"))
