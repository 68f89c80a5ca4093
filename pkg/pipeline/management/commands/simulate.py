"""
Management command to synthesize microphone signals and camera frames for a scene.
"""
import json
from dataclasses import replace
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from pipeline.options import build_array, command_errors, parse_array_flag
from pipeline.models import ArrayParams
from scene_sim.io import load_scene, write_audio, write_pgm
from scene_sim.sprites import render_synthetic_frame
from scene_sim.synthesis import frame_seed, synthesize_scene


class Command(BaseCommand):
    help = 'Synthesize multichannel audio and grayscale frames from a scene file'

    def add_arguments(self, parser):
        parser.add_argument('--scene', type=str, required=True, help='Scene file (JSON)')
        parser.add_argument('--array', type=str, help="Double-ring array 'inner,outer,n_inner,n_outer[,offset]'")
        parser.add_argument('--frames', type=int, default=1, help='Number of frames to synthesize')
        parser.add_argument('--seed', type=int, help='Seed for all randomness (defaults to the scene seed)')
        parser.add_argument('--out', type=str, default=str(Path(settings.OUTPUT_ROOT) / 'simulate'),
                            help='Output directory')

    def handle(self, *args, **options):
        with command_errors():
            scene = load_scene(options['scene'])
            array = build_array(ArrayParams(**parse_array_flag(options['array'])) if options['array']
                                else ArrayParams(settings.ARRAY_INNER_DIAMETER_M, settings.ARRAY_OUTER_DIAMETER_M,
                                                 settings.ARRAY_INNER_COUNT, settings.ARRAY_OUTER_COUNT))
            seed = scene.seed if options['seed'] is None else options['seed']
            out = Path(options['out'])
            duration = settings.FRAME_LENGTH / settings.DEFAULT_SAMPLE_RATE

            for index in range(max(1, options['frames'])):
                frame_scene = replace(scene, seed=frame_seed(seed, index))
                signal = synthesize_scene(frame_scene, array, settings.DEFAULT_SAMPLE_RATE, duration)
                frame = render_synthetic_frame(frame_scene, settings.IMAGE_WIDTH, settings.IMAGE_HEIGHT)
                write_audio(signal, out / f"frame_{index:04d}_audio.f32")
                write_pgm(frame.image, out / f"frame_{index:04d}.pgm")
                truth = {
                    'frame': index,
                    'sources': [list(source.position) for source in scene.sources],
                    'sprites': [
                        {'identity': s.identity, 'box': list(s.box),
                         'left_eye': list(s.left_eye), 'right_eye': list(s.right_eye)}
                        for s in frame.sprites
                    ],
                }
                (out / f"frame_{index:04d}_truth.json").write_text(json.dumps(truth, sort_keys=True) + '\n')

        self.stdout.write(
            self.style.SUCCESS(f"Synthesized {max(1, options['frames'])} frame(s) on {array.size} channels into {out}")
        )
