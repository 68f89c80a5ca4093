import json
import tempfile
from io import StringIO
from pathlib import Path

import yaml
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from recognition.storage import load_model
from scene_sim.models import InvalidSceneError

from .experiments import UnknownExperimentError, format_table, run_experiment
from .models import ArtifactPathError, ConfigError, FrameProcessingError, ScenarioSummary
from .options import (
    EXIT_BAD_CONFIG, EXIT_IO_FAILURE, EXIT_PROCESSING_FAILURE, build_config, command_errors,
    parse_array_flag, parse_grid_flag, read_config_file,
)
from .runner import ScenarioRunner

SCENARIOS = Path(__file__).resolve().parent / 'scenarios'
DEMO_CONFIG = SCENARIOS / 'demo.yaml'


class TempDirMixin:

    def make_tmp(self) -> Path:
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        return Path(tmp.name)


class ConfigTests(TempDirMixin, SimpleTestCase):

    def test_flags_override_file_values(self):
        config = build_config({'scene': 'a.json', 'frames': 4, 'seed': 1}, {'frames': 7, 'seed': None},
                              base_dir=Path('/data'))
        self.assertEqual(config.frames, 7)
        self.assertEqual(config.seed, 1)
        self.assertEqual(config.scene, Path('/data/a.json'))

    def test_flag_paths_are_taken_as_given(self):
        config = build_config({'scene': 'a.json'}, {'scene': 'b.json'}, base_dir=Path('/data'))
        self.assertEqual(config.scene, Path('b.json'))

    def test_array_flag_merges_into_file_array(self):
        data = {'scene': 's.json', 'array': {'angular_offset': 0.5}}
        config = build_config(data, {'array': parse_array_flag('0.1,0.3,4,6')})
        self.assertEqual((config.array.inner_diameter, config.array.outer_diameter), (0.1, 0.3))
        self.assertEqual((config.array.n_inner, config.array.n_outer), (4, 6))
        self.assertEqual(config.array.angular_offset, 0.5)

    def test_defaults_come_from_settings(self):
        config = build_config({'scene': 's.json'})
        self.assertEqual((config.grid.n_u, config.grid.n_v), (64, 48))
        self.assertEqual(config.image_size, (640, 480))
        self.assertEqual(config.mode, 'auto')

    def test_scene_is_required(self):
        with self.assertRaisesRegex(ConfigError, 'scene'):
            build_config({'frames': 3})

    def test_schema_violations_name_the_field(self):
        cases = [
            ({'scene': 's.json', 'frames': 0}, 'frames'),
            ({'scene': 's.json', 'mode': 'loud'}, 'mode'),
            ({'scene': 's.json', 'array': {'inner_diameter': 0.4, 'outer_diameter': 0.2}}, 'array'),
            ({'scene': 's.json', 'identities': ['alice', 'alice']}, 'identities'),
        ]
        for data, field in cases:
            with self.subTest(field=field):
                with self.assertRaisesRegex(ConfigError, field):
                    build_config(data)

    def test_flag_parsers(self):
        self.assertEqual(parse_grid_flag('32X24'), {'n_u': 32, 'n_v': 24})
        self.assertEqual(parse_array_flag('0.2,0.4,7,9,0.1')['angular_offset'], 0.1)
        for text in ('64', 'axb'):
            with self.assertRaises(ConfigError):
                parse_grid_flag(text)
        for text in ('0.2,0.4,7', '0.2,0.4,seven,9'):
            with self.assertRaises(ConfigError):
                parse_array_flag(text)

    def test_config_file_must_be_a_mapping(self):
        root = self.make_tmp()
        path = root / 'list.yaml'
        path.write_text('- 1\n- 2\n')
        with self.assertRaises(ConfigError):
            read_config_file(path)
        with self.assertRaises(FileNotFoundError):
            read_config_file(root / 'missing.yaml')
        self.assertEqual(read_config_file(DEMO_CONFIG)['scene'], 'demo_scene.json')

    def test_artifacts_stay_inside_output_directory(self):
        root = self.make_tmp()
        runner = ScenarioRunner(build_config({'scene': 's.json', 'out': str(root)}))
        self.assertEqual(runner.artifact_path('frames', 'a.ppm'), root.resolve() / 'frames' / 'a.ppm')
        with self.assertRaises(ArtifactPathError):
            runner.artifact_path('..', 'elsewhere.txt')

    def test_command_errors_map_to_exit_codes(self):
        cases = [
            (InvalidSceneError('bad'), EXIT_BAD_CONFIG),
            (FileNotFoundError('gone.json'), EXIT_IO_FAILURE),
            (FrameProcessingError(3, 'boom'), EXIT_PROCESSING_FAILURE),
        ]
        for error, code in cases:
            with self.subTest(error=type(error).__name__):
                with self.assertRaises(CommandError) as ctx:
                    with command_errors():
                        raise error
                self.assertEqual(ctx.exception.returncode, code)


class SummaryTests(SimpleTestCase):

    def test_summary_dict(self):
        summary = ScenarioSummary(frames=5, kind_counts={'NO_RESULT': 1, 'FACE_ONLY': 2},
                                  localization_errors_px=[1.0, 2.0, 6.0], failed_frames=[4, 2])
        data = summary.to_dict()
        self.assertEqual(list(data['kind_counts']), ['FACE_ONLY', 'NO_RESULT'])
        self.assertEqual(data['localization_error_px'], {'count': 3, 'median': 2.0, 'mean': 3.0, 'max': 6.0})
        self.assertEqual(data['failed_frames'], [2, 4])
        self.assertEqual(summary.first_failure, 2)
        self.assertEqual(summary.frames_per_second, 0.0)

    def test_empty_summary(self):
        summary = ScenarioSummary(frames=0)
        self.assertIsNone(summary.to_dict()['localization_error_px'])
        self.assertIsNone(summary.first_failure)


class ExperimentTests(TempDirMixin, SimpleTestCase):

    def test_format_table(self):
        text = format_table(['snr_db', 'error'], [[0.0, 1.5], [20.0, 'n/a']])
        self.assertEqual(text, 'snr_db\terror\n0.0\t1.5\n20.0\tn/a\n')

    def test_unknown_experiment_lists_valid_names(self):
        with self.assertRaisesRegex(UnknownExperimentError, 'localization_vs_snr'):
            run_experiment('nope')

    def test_unknown_experiment_command_exits_with_bad_config(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('experiment', 'nope', stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_BAD_CONFIG)
        self.assertIn('accuracy_vs_components', str(ctx.exception))

    def test_localization_experiment_writes_table(self):
        root = self.make_tmp()
        out = StringIO()
        call_command('experiment', 'localization_vs_snr', seeds='0', out=str(root), stdout=out)
        lines = (root / 'localization_vs_snr.tsv').read_text().splitlines()
        self.assertEqual(lines[0].split('\t'), ['snr_db', 'median_cell_error', 'mean_cell_error', 'within_one_cell'])
        self.assertEqual(len(lines), 5)
        self.assertIn('median_cell_error', out.getvalue())

    def test_experiment_options_reach_the_sweep(self):
        root = self.make_tmp()
        call_command('experiment', 'accuracy_vs_components', seeds='0', components='1,2,6', classes=3,
                     train_per_class=3, images_per_identity=5, out=str(root), stdout=StringIO())
        lines = (root / 'accuracy_vs_components.tsv').read_text().splitlines()
        self.assertEqual([line.split('	')[0] for line in lines[1:]], ['1', '2', '6'])
        self.assertEqual([line.split('	')[3] for line in lines[1:]], ['1', '2', '2'])

    def test_localization_options_reach_the_sweep(self):
        root = self.make_tmp()
        call_command('experiment', 'localization_vs_snr', seeds='0', snr_db='5,30', target_cell='30,24',
                     out=str(root), stdout=StringIO())
        lines = (root / 'localization_vs_snr.tsv').read_text().splitlines()
        self.assertEqual([line.split('	')[0] for line in lines[1:]], ['5.0', '30.0'])

    def test_component_list_for_training_sweep_is_bad_config(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('experiment', 'accuracy_vs_training_images', components='5,10', stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_BAD_CONFIG)

    def test_fisher_flat_and_eigen_plateau_beyond_rank(self):
        header, rows = run_experiment('accuracy_vs_components', {
            'seeds': (0,), 'components': (1, 2, 4, 8, 12, 15, 20), 'classes': 3,
            'train_per_class': 4, 'images_per_identity': 6,
        })
        self.assertEqual(header, ['components', 'eigen_accuracy', 'fisher_accuracy', 'fisher_components'])
        table = {row[0]: row[1:] for row in rows}
        self.assertEqual([table[count][2] for count in (1, 2, 4, 20)], [1, 2, 2, 2])
        self.assertEqual({table[count][1] for count in (2, 4, 8, 12, 15, 20)}, {table[2][1]})
        # 12 training images span at most 11 centered directions
        self.assertEqual({table[count][0] for count in (12, 15, 20)}, {table[20][0]})
        self.assertGreaterEqual(table[20][0], table[1][0])
        for eigen, fisher, _ in table.values():
            self.assertTrue(0.0 <= eigen <= 1.0)
            self.assertTrue(0.0 <= fisher <= 1.0)

    def test_training_images_table(self):
        header, rows = run_experiment('accuracy_vs_training_images', {
            'seeds': (0,), 'training_images': (1, 2, 4), 'classes': 3, 'components': 5,
            'images_per_identity': 6,
        })
        self.assertEqual(header, ['images_per_class', 'eigen_accuracy', 'fisher_accuracy', 'lbph_accuracy'])
        self.assertEqual([row[0] for row in rows], [1, 2, 4])
        for row in rows:
            for value in row[1:]:
                self.assertTrue(value == 'n/a' or 0.0 <= value <= 1.0, value)
        self.assertNotEqual(rows[-1][3], 'n/a')

    def test_localization_error_does_not_grow_with_snr(self):
        header, rows = run_experiment('localization_vs_snr', {'seeds': tuple(range(10))})
        medians = [row[1] for row in rows]
        self.assertEqual([row[0] for row in rows], [0.0, 10.0, 20.0, 40.0])
        for lower, higher in zip(medians, medians[1:]):
            self.assertLessEqual(higher, lower)
        self.assertLessEqual(medians[-1], 1.0)


class FuseCommandTests(SimpleTestCase):

    def run_fuse(self, **options):
        out = StringIO()
        call_command('fuse', stdout=out, **options)
        return json.loads(out.getvalue())

    def test_colocated_face_is_identified(self):
        record = self.run_fuse(acoustic='400,200', face='alice@410,205', frame=2)
        self.assertEqual(record['kind'], 'IDENTIFIED_SPEAKER')
        self.assertEqual(record['identity'], 'alice')
        self.assertEqual(record['speaker_xy'], [410.0, 205.0])
        self.assertEqual(record['frame'], 2)

    def test_distant_face_is_reported_separately(self):
        record = self.run_fuse(acoustic='100,100,3.5', face='bob@500,400')
        self.assertEqual(record['kind'], 'SOURCE_AND_FACE_SEPARATE')
        self.assertNotIn('speaker_xy', record)

    def test_no_inputs(self):
        self.assertEqual(self.run_fuse(), {'frame': 0, 'kind': 'NO_RESULT'})

    def test_malformed_face_is_bad_config(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_fuse(face='alice')
        self.assertEqual(ctx.exception.returncode, EXIT_BAD_CONFIG)


class TrainCommandTests(TempDirMixin, SimpleTestCase):

    def test_train_writes_loadable_model(self):
        path = self.make_tmp() / 'model.json'
        out = StringIO()
        call_command('train', kind='eigen', identities='alice,bob', images_per_identity=3, components=4,
                     out=str(path), stdout=out)
        model = load_model(path)
        self.assertEqual(model.kind, 'eigen')
        self.assertIsNotNone(model.unknown_threshold)
        self.assertIn('Query time', out.getvalue())
        self.assertIn(str(path), out.getvalue())


class ScenarioCommandTests(TempDirMixin, SimpleTestCase):

    def write_config(self, root: Path, data: dict) -> Path:
        path = root / 'config.yaml'
        path.write_text(yaml.safe_dump(data))
        return path

    def test_schema_violation_exits_with_bad_config(self):
        root = self.make_tmp()
        config = self.write_config(root, {'scene': str(SCENARIOS / 'demo_scene.json'), 'frames': 0})
        with self.assertRaises(CommandError) as ctx:
            call_command('demo', config=str(config), out=str(root / 'out'), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_BAD_CONFIG)
        self.assertIn('frames', str(ctx.exception))

    def test_missing_scene_names_the_path(self):
        root = self.make_tmp()
        config = self.write_config(root, {'scene': 'no_such_scene.json', 'frames': 1})
        with self.assertRaises(CommandError) as ctx:
            call_command('demo', config=str(config), out=str(root / 'out'), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_IO_FAILURE)
        self.assertIn('no_such_scene.json', str(ctx.exception))


class DemoScenarioTests(SimpleTestCase):
    """The bundled talking-sprite scenario, run once for the whole class."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.out = Path(cls.tmp.name) / 'demo'
        cls.stdout = StringIO()
        call_command('demo', out=str(cls.out), stdout=cls.stdout)
        cls.records = [json.loads(line) for line in (cls.out / 'outcomes.jsonl').read_text().splitlines()]

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def test_one_map_and_one_outcome_per_frame(self):
        self.assertEqual([r['frame'] for r in self.records], list(range(10)))
        maps = sorted(p.name for p in (self.out / 'frames').glob('*_map.ppm'))
        self.assertEqual(maps, [f"frame_{k:04d}_map.ppm" for k in range(10)])
        summary = json.loads((self.out / 'summary.json').read_text())
        self.assertEqual(summary['frames'], 10)
        self.assertEqual(summary['failed_frames'], [])
        self.assertEqual(sum(summary['kind_counts'].values()), 10)

    def test_talking_sprite_is_identified(self):
        identified = [r for r in self.records if r['kind'] == 'IDENTIFIED_SPEAKER' and r['identity'] == 'alice']
        self.assertGreaterEqual(len(identified), 9)
        self.assertIn('Scenario complete', self.stdout.getvalue())

    def test_rerun_is_deterministic_regardless_of_workers(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / 'rerun'
            call_command('demo', out=str(out), frames=3, workers=4, stdout=StringIO())
            lines = (out / 'outcomes.jsonl').read_text().splitlines()
            first = (self.out / 'outcomes.jsonl').read_text().splitlines()[:3]
            self.assertEqual(lines, first)
            self.assertEqual((out / 'frames' / 'frame_0002_map.ppm').read_bytes(),
                             (self.out / 'frames' / 'frame_0002_map.ppm').read_bytes())
