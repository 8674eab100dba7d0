import json
import tempfile
from datetime import timedelta
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from config.exceptions import ConfigurationError, NetworkFileError
from materials.laws import ElasticLaw
from mechanics.mandel import SQRT2
from network.forward import forward_stiffness
from network.topology import build_network
from training.datasets import generate_phase_pair, generate_teacher_dataset
from .commands import MANIFEST_NAME, file_hash, options_hash
from .factories import RunManifestFactory
from .models import RunManifest
from .networks import load_network, network_to_dict, save_network
from .tables import load_dataset, load_strain_path, save_dataset, write_history


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()


class NetworkFileTest(TempDirMixin, SimpleTestCase):
    """Tests for network parameter files."""

    def test_round_trip_is_exact(self):
        """Test a saved and reloaded network predicts the same stiffnesses."""
        net = build_network(4, seed=11)
        loaded = load_network(save_network(net, self.tmp / 'net.json'))
        np.testing.assert_array_equal(loaded.z, net.z)
        np.testing.assert_array_equal(loaded.angles, net.angles)
        rng = np.random.default_rng(3)
        for _ in range(10):
            c_f, c_m = generate_phase_pair(rng)
            np.testing.assert_array_equal(forward_stiffness(loaded, c_f, c_m), forward_stiffness(net, c_f, c_m))

    def test_missing_field_is_named(self):
        """Test a truncated file reports the field it lacks."""
        data = network_to_dict(build_network(2, seed=0))
        del data['angles']
        path = self.tmp / 'net.json'
        path.write_text(json.dumps(data))
        with self.assertRaisesMessage(NetworkFileError, "missing field 'angles'"):
            load_network(path)

    def test_wrong_lengths_and_version(self):
        """Test inconsistent array sizes and unknown versions are rejected."""
        data = network_to_dict(build_network(3, seed=0))
        path = self.tmp / 'net.json'
        path.write_text(json.dumps(dict(data, z=data['z'][:-1])))
        with self.assertRaisesMessage(NetworkFileError, "field 'z'"):
            load_network(path)
        path.write_text(json.dumps(dict(data, version=99)))
        with self.assertRaisesMessage(NetworkFileError, 'unsupported version'):
            load_network(path)

    def test_invalid_json_and_missing_file(self):
        """Test unreadable files raise NetworkFileError."""
        path = self.tmp / 'net.json'
        path.write_text('{"format": ')
        with self.assertRaisesMessage(NetworkFileError, 'not valid JSON'):
            load_network(path)
        with self.assertRaisesMessage(NetworkFileError, 'no such network file'):
            load_network(self.tmp / 'absent.json')


class TableFileTest(TempDirMixin, SimpleTestCase):
    """Tests for dataset, loading path and history tables."""

    def test_dataset_round_trip(self):
        """Test a dataset reloads with identical stiffnesses and header fields."""
        teacher = build_network(3, seed=5)
        data = generate_teacher_dataset(teacher, 10, np.random.default_rng(1), name='anchor')
        data.descriptor = (0.2, 0.6, 0.3)
        loaded = load_dataset(save_dataset(data, self.tmp / 'data.csv'))
        for split in ('train', 'test'):
            for stack in ('fiber', 'matrix', 'composite'):
                np.testing.assert_array_equal(
                    getattr(getattr(loaded, split), stack), getattr(getattr(data, split), stack)
                )
        self.assertEqual(loaded.descriptor, (0.2, 0.6, 0.3))
        self.assertEqual(loaded.teacher_hash, teacher.fingerprint())
        self.assertEqual(loaded.name, 'anchor')

    def test_dataset_rejects_foreign_files(self):
        """Test files without the dataset header are refused."""
        path = self.tmp / 'data.csv'
        path.write_text('a,b\n1,2\n')
        with self.assertRaisesMessage(ConfigurationError, 'not a dataset file'):
            load_dataset(path)
        with self.assertRaises(ConfigurationError):
            load_dataset(self.tmp / 'absent.csv')

    def test_strain_path_increments(self):
        """Test each row is read as one engineering strain increment."""
        path = self.tmp / 'path.csv'
        path.write_text(
            'step,e11,e22,e33,g12,g23,g31\n'
            '1,0.001,0,0,0.002,0,0\n'
            '2,0.001,0,0,0.002,0,0\n'
            '3,0.001,0,0,0.002,0,0\n'
        )
        steps, increments = load_strain_path(path)
        np.testing.assert_array_equal(steps, [1, 2, 3])
        for row in increments:
            np.testing.assert_allclose(row, [0.001, 0, 0, 0.002 / SQRT2, 0, 0], atol=1e-18)
        np.testing.assert_allclose(increments.sum(axis=0)[0], 0.003, rtol=1e-14)

    def test_strain_path_cumulative_rows(self):
        """Test totals per step are differenced only when asked for."""
        path = self.tmp / 'path.csv'
        path.write_text(
            'step,e11,e22,e33,g12,g23,g31\n'
            '10,0.001,0,0,0.002,0,0\n'
            '20,0.003,0,0,0.002,0,0\n'
        )
        steps, increments = load_strain_path(path, cumulative=True)
        np.testing.assert_array_equal(steps, [10, 20])
        np.testing.assert_allclose(increments[0], [0.001, 0, 0, 0.002 / SQRT2, 0, 0], atol=1e-18)
        np.testing.assert_allclose(increments[1], [0.002, 0, 0, 0, 0, 0], atol=1e-18)

    def test_strain_path_without_step_column(self):
        """Test steps default to 1..n and missing columns are reported."""
        path = self.tmp / 'path.csv'
        path.write_text('e11,e22,e33,g12,g23,g31\n0.001,0,0,0,0,0\n0.002,0,0,0,0,0\n0.003,0,0,0,0,0\n')
        steps, increments = load_strain_path(path)
        np.testing.assert_array_equal(steps, [1, 2, 3])
        self.assertEqual(increments.shape, (3, 6))
        path.write_text('e11,e22\n0.001,0\n')
        with self.assertRaisesMessage(ConfigurationError, 'missing columns'):
            load_strain_path(path)

    def test_write_history_creates_parents(self):
        """Test histories land in freshly created directories."""
        target = write_history(pd.DataFrame({'step': [0, 1], 's11': [0.0, 1.5]}), self.tmp / 'a' / 'b.csv')
        self.assertEqual(pd.read_csv(target)['s11'].tolist(), [0.0, 1.5])

    def test_hashes_are_stable(self):
        """Test file and option hashes depend on content only."""
        first = self.tmp / 'x.txt'
        second = self.tmp / 'y.txt'
        first.write_text('same')
        second.write_text('same')
        self.assertEqual(file_hash(first), file_hash(second))
        self.assertEqual(options_hash({'a': 1, 'b': 2}), options_hash({'b': 2, 'a': 1}))


class RunManifestTest(TestCase):
    """Tests for the RunManifest model."""

    def test_str_and_dict(self):
        """Test the readable form and the JSON form of a manifest."""
        manifest = RunManifestFactory(command='point_sim', exit_status=2)
        self.assertIn('point_sim (', str(manifest))
        self.assertTrue(str(manifest).endswith('status 2)'))
        data = manifest.as_dict()
        self.assertEqual(data['command'], 'point_sim')
        self.assertEqual(data['exit_status'], 2)
        json.dumps(data)

    def test_ordering_newest_first(self):
        """Test manifests list the latest run first."""
        older = RunManifestFactory()
        newer = RunManifestFactory(started_at=older.started_at + timedelta(seconds=5))
        self.assertEqual(list(RunManifest.objects.all()), [newer, older])


class EngineCommandTest(TempDirMixin, TestCase):
    """Tests for command plumbing through the train command."""

    def setUp(self):
        super().setUp()
        data = generate_teacher_dataset(build_network(3, seed=2), 10, np.random.default_rng(4), name='small')
        self.data_path = save_dataset(data, self.tmp / 'data.csv')
        self.config_path = self.tmp / 'train.json'
        self.config_path.write_text(json.dumps({'n_layers': 3, 'seed': 7, 'n_batches': 2}))
        runs = override_settings(DMN_OUTPUT_DIR=str(self.tmp / 'runs'))
        runs.enable()
        self.addCleanup(runs.disable)

    def test_train_writes_network_and_manifest(self):
        """Test a zero-epoch run writes the network, its history and a manifest."""
        out = self.tmp / 'out' / 'net.json'
        call_command(
            'train', data=str(self.data_path), config=str(self.config_path), out=str(out), epochs=0,
            stdout=StringIO(),
        )
        net = load_network(out)
        self.assertEqual(net.n_layers, 3)
        self.assertTrue(out.with_suffix('.history.csv').is_file())
        manifest = json.loads((out.parent / MANIFEST_NAME).read_text())
        self.assertEqual(manifest['exit_status'], 0)
        self.assertEqual(manifest['seeds'], {'seed': 7})
        self.assertIn(str(self.data_path), manifest['input_hashes'])
        stored = RunManifest.objects.get()
        self.assertEqual(stored.command, 'train')
        self.assertEqual(stored.exit_status, 0)

    def test_missing_dataset_exits_with_input_status(self):
        """Test an absent dataset maps to exit status 1 and is still recorded."""
        with self.assertRaises(CommandError) as ctx:
            call_command('train', data=str(self.tmp / 'absent.csv'), out=str(self.tmp / 'net.json'), epochs=0)
        self.assertTrue((self.tmp / 'runs' / MANIFEST_NAME).is_file())
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertEqual(RunManifest.objects.get().exit_status, 1)

    def test_usage_error_exits_with_input_status(self):
        """Test a missing required option is a usage error with status 1."""
        with self.assertRaises(CommandError) as ctx:
            call_command('train', data=str(self.data_path))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_invalid_config_exits_with_input_status(self):
        """Test a rejected training configuration maps to status 1."""
        self.config_path.write_text(json.dumps({'bold_up': 0.9}))
        with self.assertRaises(CommandError) as ctx:
            call_command(
                'train', data=str(self.data_path), config=str(self.config_path), out=str(self.tmp / 'net.json'),
            )
        self.assertEqual(ctx.exception.returncode, 1)

    def test_point_sim_applies_every_increment(self):
        """Test point_sim accumulates one increment per path row."""
        net = build_network(3, seed=4)
        net_path = save_network(net, self.tmp / 'net.json')
        materials = self.tmp / 'materials.json'
        materials.write_text(json.dumps({
            'fiber': {'law': 'elastic', 'E': 72000.0, 'nu': 0.2},
            'matrix': {'law': 'elastic', 'E': 1616.0, 'nu': 0.3545},
        }))
        path = self.tmp / 'path.csv'
        path.write_text('step,e11,e22,e33,g12,g23,g31\n1,1e-3,0,0,0,0,0\n2,1e-3,0,0,0,0,0\n3,1e-3,0,0,0,0,0\n')
        out = self.tmp / 'out' / 'history.csv'
        call_command(
            'point_sim', net=str(net_path), materials=str(materials), path=str(path), out=str(out),
            stdout=StringIO(),
        )
        history = pd.read_csv(out)
        self.assertEqual(history['step'].tolist(), [1, 2, 3])
        stiffness = forward_stiffness(net, ElasticLaw(E=72000.0, nu=0.2).stiffness,
                                      ElasticLaw(E=1616.0, nu=0.3545).stiffness)
        np.testing.assert_allclose(history['s11'], stiffness[0, 0] * np.array([1e-3, 2e-3, 3e-3]), rtol=1e-8)
