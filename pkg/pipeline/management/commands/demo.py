"""
Management command to run an end-to-end speaker identification scenario.
"""
import json
from pathlib import Path

from django.core.management.base import BaseCommand

from pipeline.options import (
    add_scenario_arguments, build_config, command_errors, read_config_file, scenario_overrides,
)
from pipeline.runner import ScenarioRunner

DEMO_CONFIG = Path(__file__).resolve().parents[2] / 'scenarios' / 'demo.yaml'


class Command(BaseCommand):
    help = 'Run a scenario (the bundled demo unless --config is given); flags override config values'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, default=str(DEMO_CONFIG), help='Scenario config (YAML or JSON)')
        add_scenario_arguments(parser)

    def handle(self, *args, **options):
        with command_errors():
            config_path = Path(options['config'])
            config = build_config(read_config_file(config_path), scenario_overrides(options),
                                  base_dir=config_path.resolve().parent)
            runner = ScenarioRunner(config)
            self.stdout.write(f"Running {config.frames} frame(s) from {config.scene} into {config.out}")
            summary = runner.run()

        for kind, count in sorted(summary.kind_counts.items()):
            self.stdout.write(f"  {kind}: {count}")
        stats = summary.to_dict()['localization_error_px']
        if stats:
            self.stdout.write(f"  localization error (px): median {stats['median']}, max {stats['max']}")
        self.stdout.write(f"  throughput: {summary.frames_per_second:.2f} frames/s")
        self.stdout.write(self.style.SUCCESS(
            f"Scenario complete: {json.dumps(summary.kind_counts, sort_keys=True)}"
        ))
