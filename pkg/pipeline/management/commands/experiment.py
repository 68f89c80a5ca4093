"""
Management command to run a parameter sweep and emit its table.
"""
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from pipeline.experiments import EXPERIMENTS, format_table
from pipeline.models import ConfigError
from pipeline.options import EXIT_BAD_CONFIG, command_errors, parse_floats
from pipeline.tasks import run_experiment_task

LIST_OPTIONS = {
    'seeds': ('seeds', int),
    'snr_db': ('snr_db', float),
    'training_images': ('training_images', int),
}
COUNT_OPTIONS = ('classes', 'train_per_class', 'images_per_identity')


def parse_list(text: str, name: str, cast):
    return [cast(v) for v in parse_floats(text, len(str(text).split(',')), name)]


class Command(BaseCommand):
    help = 'Run an experiment: ' + ', '.join(sorted(EXPERIMENTS))

    def add_arguments(self, parser):
        parser.add_argument('name', type=str, help='Experiment name')
        parser.add_argument('--seeds', type=str, help="Comma-separated seeds, e.g. '0,1,2'")
        parser.add_argument('--components', type=str,
                            help='Component counts to sweep (accuracy_vs_components) or the single '
                                 'eigenface count (accuracy_vs_training_images)')
        parser.add_argument('--snr-db', type=str, help="SNR levels in dB, e.g. '0,10,20,40'")
        parser.add_argument('--training-images', type=str, help="Training images per class to sweep, e.g. '1,2,4'")
        parser.add_argument('--classes', type=int, help='Number of synthetic identities')
        parser.add_argument('--train-per-class', type=int, help='Training images per class')
        parser.add_argument('--images-per-identity', type=int, help='Synthetic images per identity')
        parser.add_argument('--target-cell', type=str, help="Source cell as 'col,row'")
        parser.add_argument('--out', type=str, default=str(Path(settings.OUTPUT_ROOT) / 'experiments'),
                            help='Directory for the table file')

    def build_params(self, name: str, options: dict) -> dict:
        params = {}
        for option, (key, cast) in LIST_OPTIONS.items():
            if options.get(option):
                params[key] = parse_list(options[option], option, cast)
        if options.get('components'):
            counts = parse_list(options['components'], 'components', int)
            if name == 'accuracy_vs_components':
                params['components'] = counts
            elif len(counts) == 1:
                params['components'] = counts[0]
            else:
                raise ConfigError(f"components: {name} takes a single count, got '{options['components']}'")
        for option in COUNT_OPTIONS:
            if options.get(option) is not None:
                if options[option] < 1:
                    raise ConfigError(f"{option}: must be at least 1, got {options[option]}")
                params[option] = options[option]
        if options.get('target_cell'):
            params['target_cell'] = tuple(int(v) for v in parse_floats(options['target_cell'], 2, 'target_cell'))
        return params

    def handle(self, *args, **options):
        name = options['name']
        if name not in EXPERIMENTS:
            raise CommandError(
                f"Unknown experiment '{name}'; valid names: {', '.join(sorted(EXPERIMENTS))}",
                returncode=EXIT_BAD_CONFIG,
            )
        with command_errors():
            params = self.build_params(name, options)
            result = run_experiment_task.delay(name, params, options['out']).get()

        self.stdout.write(format_table(result['header'], result['rows']), ending='')
        self.stdout.write(self.style.SUCCESS(f"Table written to {result['path']}"))
