"""
Management command to compute a steered response power map and its peak.
"""
import json
from dataclasses import replace
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from localization.beamformer import combined_srp_map, find_peak, srp_map
from localization.colormap import write_color_map, write_power_matrix
from localization.models import Weighting
from pipeline.models import ArrayParams, ConfigError, GridParams
from pipeline.options import build_array, build_grid, command_errors, parse_array_flag, parse_grid_flag
from scene_sim.io import load_scene, read_audio
from scene_sim.synthesis import frame_seed, synthesize_scene


class Command(BaseCommand):
    help = 'Localize the dominant sound source and write the color map'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--scene', type=str, help='Scene file to synthesize')
        source.add_argument('--audio', type=str, help='Exported audio file with its JSON sidecar')
        parser.add_argument('--array', type=str, help="Double-ring array 'inner,outer,n_inner,n_outer[,offset]'")
        parser.add_argument('--grid', type=str, help="Steering grid cells, e.g. '64x48'")
        parser.add_argument('--mode', choices=['phat', 'const', 'auto'], default='auto', help='Weighting')
        parser.add_argument('--seed', type=int, help='Seed for the synthesized frame')
        parser.add_argument('--floor', type=float, default=0.0, help='Minimum peak power')
        parser.add_argument('--out', type=str, default=str(Path(settings.OUTPUT_ROOT) / 'localize'),
                            help='Output directory')

    def handle(self, *args, **options):
        with command_errors():
            array_params = ArrayParams(settings.ARRAY_INNER_DIAMETER_M, settings.ARRAY_OUTER_DIAMETER_M,
                                       settings.ARRAY_INNER_COUNT, settings.ARRAY_OUTER_COUNT)
            if options['array']:
                array_params = ArrayParams(**parse_array_flag(options['array']))
            grid_params = GridParams(settings.GRID_CELLS_U, settings.GRID_CELLS_V, settings.GRID_DISTANCE_M,
                                     settings.GRID_HALF_WIDTH_M, settings.GRID_HALF_HEIGHT_M)
            if options['grid']:
                grid_params = replace(grid_params, **parse_grid_flag(options['grid']))
            array = build_array(array_params)
            grid = build_grid(grid_params)
            speed_of_sound = settings.SPEED_OF_SOUND

            if options['scene']:
                scene = load_scene(options['scene'])
                speed_of_sound = scene.speed_of_sound
                if options['seed'] is not None:
                    scene = replace(scene, seed=frame_seed(options['seed'], 0))
                signal = synthesize_scene(scene, array, settings.DEFAULT_SAMPLE_RATE,
                                          settings.FRAME_LENGTH / settings.DEFAULT_SAMPLE_RATE)
            else:
                signal = read_audio(options['audio'])
                if signal.channel_count != array.size:
                    raise ConfigError(f"audio: {signal.channel_count} channels do not match "
                                      f"the {array.size}-microphone array")

            if options['mode'] == 'auto':
                power_map = combined_srp_map(signal, array, grid, settings.BANDWIDTH_THRESHOLD_HZ, speed_of_sound)
            else:
                weighting = Weighting.PHAT if options['mode'] == 'phat' else Weighting.CONST
                power_map = srp_map(signal, array, grid, weighting, speed_of_sound)
            peak = find_peak(power_map, options['floor'])

            out = Path(options['out'])
            write_color_map(power_map, out / 'map.ppm')
            write_power_matrix(power_map, out / 'map.json')
            record = {'mode': power_map.mode_used.value, 'peak': None}
            if peak is not None:
                record['peak'] = {'cell': list(peak.cell), 'power': peak.power,
                                  'point': [float(v) for v in grid.cell_center(*peak.cell)]}
            (out / 'peak.json').write_text(json.dumps(record, indent=2, sort_keys=True) + '\n')

        if peak is None:
            self.stdout.write(self.style.WARNING(f"No peak above floor {options['floor']} ({power_map.mode_used.value})"))
        else:
            self.stdout.write(self.style.SUCCESS(
                f"Peak at cell {peak.cell} ({power_map.mode_used.value}, power {peak.power:.4g}); map written to {out}"
            ))
