import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import Mock, patch

import numpy as np
from django.apps import apps
from django.test import SimpleTestCase

from config.exceptions import ChainError, ConfigurationError, DivergenceError
from mechanics.mandel import is_spd
from network.forward import forward_stiffness
from network.topology import Network, build_network
from .backprop import cost, cost_and_gradients, gradients
from .datasets import (
    FIBER_MODULUS_RANGE,
    generate_phase_pair,
    generate_teacher_dataset,
    perturbed_teacher,
)
from .optimizer import TrainConfig, evaluate_error, plot_history, train, transfer_train_chain
from .serializers import parse_train_config


class DatasetGenerationTest(SimpleTestCase):
    """Tests for synthetic teacher data."""

    def test_phase_pair_contrast(self):
        """Test sampled phases are SPD and fibers carry moduli from the fiber range."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            c_f, c_m = generate_phase_pair(rng)
            self.assertTrue(is_spd(c_f) and is_spd(c_m))
            self.assertGreaterEqual(np.max(np.diag(c_f)[:3]), FIBER_MODULUS_RANGE[0])

    def test_split_and_labels(self):
        """Test an 80/20 split labelled by the teacher's forward pass."""
        teacher = build_network(3, seed=1)
        data = generate_teacher_dataset(teacher, 10, np.random.default_rng(2), name='demo')
        self.assertEqual((len(data.train), len(data.test)), (8, 2))
        self.assertEqual(data.teacher_hash, teacher.fingerprint())
        np.testing.assert_allclose(
            data.test.composite, forward_stiffness(teacher, data.test.fiber, data.test.matrix), rtol=1e-14
        )

    def test_same_seed_same_data(self):
        """Test generation is reproducible from the seed."""
        teacher = build_network(3, seed=1)
        a = generate_teacher_dataset(teacher, 6, np.random.default_rng(4))
        b = generate_teacher_dataset(teacher, 6, np.random.default_rng(4))
        np.testing.assert_array_equal(a.train.composite, b.train.composite)

    def test_too_few_samples(self):
        """Test a single sample cannot be split."""
        with self.assertRaises(ValueError):
            generate_teacher_dataset(build_network(2, seed=0), 1, np.random.default_rng(0))

    def test_perturbed_teacher_stays_close(self):
        """Test perturbed teachers differ from the base by small noise."""
        base = build_network(4, seed=0)
        other = perturbed_teacher(base, np.random.default_rng(1), scale=0.01)
        self.assertNotEqual(other.fingerprint(), base.fingerprint())
        self.assertLess(np.max(np.abs(other.z - base.z)), 0.1)
        self.assertEqual(other.provenance['base'], base.fingerprint())


class GradientTest(SimpleTestCase):
    """Tests for the reverse-mode gradient of the cost."""

    def setUp(self):
        self.teacher = build_network(4, seed=100)
        self.data = generate_teacher_dataset(self.teacher, 7, np.random.default_rng(5))
        self.batch = self.data.train.subset(np.arange(5))
        self.student = build_network(4, seed=7)

    def assertMatchesCentralDifferences(self, net, lam=0.001):
        _, grads = cost_and_gradients(net, self.batch, lam)
        analytic = grads.vector()
        params = net.parameter_vector()
        for i, p in enumerate(params):
            h = 1e-6 * max(1.0, abs(p))
            up, down = params.copy(), params.copy()
            up[i] += h
            down[i] -= h
            fd = (
                cost(Network.from_parameter_vector(net.n_layers, up), self.batch, lam)
                - cost(Network.from_parameter_vector(net.n_layers, down), self.batch, lam)
            ) / (2.0 * h)
            self.assertLessEqual(abs(analytic[i] - fd), 1e-5 * max(1.0, abs(fd)), msg=f'parameter {i}')

    def test_matches_central_differences(self):
        """Test every gradient component against central finite differences."""
        self.assertMatchesCentralDifferences(self.student)

    def test_pruned_network_matches_central_differences(self):
        """Test gradients through pass-through and fully dead blocks."""
        z = np.array(self.student.z)
        z[[0, 4, 5]] = -0.1
        self.assertMatchesCentralDifferences(self.student.with_parameters(z, self.student.angles))

    def test_dead_nodes_have_zero_gradient(self):
        """Test pruned activations receive no gradient and pruned nets still differentiate."""
        z = np.array(self.student.z)
        z[[0, 3]] = -0.1
        net = self.student.with_parameters(z, self.student.angles)
        dz, dalpha, dbeta, dgamma = gradients(net, self.batch, 0.001)
        self.assertEqual(dz[0], 0.0)
        self.assertEqual(dz[3], 0.0)
        self.assertTrue(np.all(np.isfinite(dalpha)) and np.all(np.isfinite(dgamma)))
        self.assertEqual(dbeta.shape, (15,))

    def test_empty_batch(self):
        """Test the cost of an empty batch is rejected."""
        with self.assertRaises(ValueError):
            cost(self.student, self.batch.subset(np.arange(0)), 0.001)


class OptimizerTest(SimpleTestCase):
    """Tests for bold-driver gradient descent."""

    def setUp(self):
        self.data = generate_teacher_dataset(build_network(3, seed=3), 40, np.random.default_rng(6))

    def test_zero_epochs_keeps_parameters(self):
        """Test training for zero epochs returns the initial trainables."""
        init = build_network(3, seed=9)
        result = train(init, self.data, TrainConfig(epochs=0, n_layers=3))
        np.testing.assert_array_equal(result.network.parameter_vector(), init.parameter_vector())
        self.assertEqual(len(result.history), 1)

    def test_bold_driver_and_monotone_error(self):
        """Test accepted epochs grow the rate, reverted epochs shrink it and training error never rises."""
        cfg = TrainConfig(epochs=30, n_batches=4, n_layers=3, seed=1)
        result = train(build_network(3, seed=9), self.data, cfg)
        history = result.history
        self.assertTrue(np.all(np.diff(history['train_error']) <= 0.0))
        self.assertLess(history['train_error'].iloc[-1], history['train_error'].iloc[0])
        for previous, row in zip(history.iloc[:-1].itertuples(), history.iloc[1:].itertuples()):
            factor = cfg.bold_down if row.reverted else cfg.bold_up
            self.assertAlmostEqual(row.lr, previous.lr * factor, delta=1e-15 * previous.lr)
            if row.reverted:
                self.assertEqual(row.train_error, previous.train_error)
                self.assertEqual(row.train_cost, previous.train_cost)
        self.assertIn('training_config', result.network.provenance)

    @patch('training.optimizer.cost_and_gradients')
    def test_non_finite_gradients_diverge_at_rate_floor(self, mock_gradients):
        """Test non-finite steps halve the rate down to lr_min and then raise at once."""
        init = build_network(3, seed=9)
        mock_gradients.return_value = (0.0, Mock(vector=lambda: np.full(init.parameter_vector().size, np.nan)))
        cfg = TrainConfig(epochs=100, n_batches=2, n_layers=3, lr0=1e-3, lr_min=1e-3 * 0.5 ** 3)
        finished = []
        with self.assertRaises(DivergenceError) as ctx:
            train(init, self.data, cfg, callback=lambda epoch, net: finished.append(epoch))
        self.assertEqual(finished, [1, 2, 3])
        self.assertIn('epoch 4', str(ctx.exception))
        np.testing.assert_array_equal(ctx.exception.snapshot.parameter_vector(), init.parameter_vector())

    @patch('training.optimizer.cost_and_gradients')
    def test_unchanged_error_reverts_down_to_rate_floor(self, mock_gradients):
        """Test epochs that leave the training error unchanged are reverted and lr settles at lr_min."""
        init = build_network(3, seed=9)
        mock_gradients.return_value = (0.0, Mock(vector=lambda: np.zeros(init.parameter_vector().size)))
        cfg = TrainConfig(epochs=5, n_batches=2, n_layers=3, lr0=1e-3, lr_min=1e-3 * 0.5 ** 3)
        history = train(init, self.data, cfg).history
        self.assertTrue(history['reverted'].iloc[1:].all())
        np.testing.assert_array_equal(history['lr'], [1e-3, 5e-4, 2.5e-4, 1.25e-4, 1.25e-4, 1.25e-4])
        self.assertEqual(history['train_error'].nunique(), 1)

    def test_warm_start_is_stationary(self):
        """Test a network trained on its own data keeps its error."""
        teacher = build_network(3, seed=3)
        start = evaluate_error(teacher, self.data.train)
        result = train(teacher, self.data, TrainConfig(epochs=10, n_layers=3, lam=0.0))
        self.assertLessEqual(result.summary()['train_error'], start + 1e-4)

    def test_chain_needs_stages(self):
        """Test an empty chain is rejected."""
        with self.assertRaises(ChainError):
            transfer_train_chain([])

    def test_chain_rejects_depth_change(self):
        """Test chain stages must keep the depth of the first stage."""
        stages = [(self.data, TrainConfig(epochs=0, n_layers=3)), (self.data, TrainConfig(epochs=0, n_layers=4))]
        with self.assertRaises(ChainError):
            transfer_train_chain(stages)

    def test_chain_starts_each_stage_from_previous(self):
        """Test chain stages are numbered and warm-started."""
        stages = [(self.data, TrainConfig(epochs=2, n_layers=3)), (self.data, TrainConfig(epochs=0, n_layers=3))]
        first, second = transfer_train_chain(stages)
        self.assertEqual(second.provenance['stage'], 2)
        np.testing.assert_array_equal(first.parameter_vector(), second.parameter_vector())

    def test_invalid_config(self):
        """Test out-of-range hyperparameters raise configuration errors."""
        with self.assertRaises(ConfigurationError):
            TrainConfig(epochs=-1)
        with self.assertRaises(ConfigurationError):
            TrainConfig(bold_up=0.9)
        with self.assertRaises(ConfigurationError):
            TrainConfig(lr0=1e-3, lr_min=1e-2)

    def test_plot_history(self):
        """Test the error plot is written."""
        result = train(build_network(3, seed=9), self.data, TrainConfig(epochs=3, n_layers=3))
        with tempfile.TemporaryDirectory() as tmp:
            path = plot_history(result.history, Path(tmp) / 'history.png')
            self.assertTrue(path.exists())

    @unittest.skipUnless(os.getenv('DMN_RUN_SLOW') == '1', 'set DMN_RUN_SLOW=1 to run long training')
    def test_eight_layer_student_converges(self):
        """Test an 8-layer student reaches 1% error on teacher data."""
        data = generate_teacher_dataset(build_network(8, seed=50), 500, np.random.default_rng(50))
        result = train(build_network(8, seed=51), data, TrainConfig(n_layers=8, log_every=1000))
        self.assertLessEqual(result.summary()['test_error'], 1e-2)


class TrainConfigSerializerTest(SimpleTestCase):
    """Tests for training configuration files."""

    def test_lambda_key(self):
        """Test 'lambda' maps onto the regularization weight."""
        cfg = parse_train_config({'lambda': 0.01, 'epochs': 5, 'n_layers': 4})
        self.assertEqual((cfg.lam, cfg.epochs, cfg.n_layers), (0.01, 5, 4))

    def test_defaults_from_settings(self):
        """Test unset fields fall back to settings."""
        self.assertEqual(parse_train_config({}).epochs, 20000)

    def test_invalid_payloads(self):
        """Test bad learning rates and bold-driver factors are rejected."""
        for payload in ({'lr0': 0}, {'bold_up': 1.0}, {'bold_down': 1.5}, {'n_layers': 1}, {'epochs': -3},
                        {'lr_min': 0}, {'lr_min': 1.0}):
            with self.assertRaises(ConfigurationError):
                parse_train_config(payload)

    def test_validates_without_auth_app(self):
        """Test config validation runs with only contenttypes among the contrib apps."""
        self.assertFalse(apps.is_installed('django.contrib.auth'))
        self.assertTrue(apps.is_installed('rest_framework'))
        cfg = parse_train_config({'lr0': 0.02, 'lr_min': 1e-6})
        self.assertEqual((cfg.lr0, cfg.lr_min), (0.02, 1e-6))
