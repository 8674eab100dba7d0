import numpy as np
from django.test import SimpleTestCase

from config.exceptions import DegenerateInterfaceError, EmptyNetworkError, TopologyError
from mechanics.mandel import is_spd, isotropic_stiffness, rotate_stiffness
from training.datasets import generate_phase_pair
from .building_block import (
    block_homogenize,
    interface_solve,
    phase2_concentration,
    strain_concentration,
    voigt_reuss_bounds,
)
from .forward import forward_stiffness, forward_with_record
from .testing import oracle_block, reference_forward
from .topology import FIBER, MATRIX, Network, PhaseAssignment, build_network

C_FIBER = isotropic_stiffness(72000.0, 0.20)
C_MATRIX = isotropic_stiffness(1616.0, 0.3545)


def random_anisotropic_pair(rng):
    """Generally anisotropic SPD phases: rotated orthotropic samples."""
    c_f, c_m = generate_phase_pair(rng)
    return (
        rotate_stiffness(c_f, rng.uniform(-np.pi, np.pi, 3)),
        rotate_stiffness(c_m, rng.uniform(-np.pi, np.pi, 3)),
    )


def relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class NetworkTopologyTest(SimpleTestCase):
    """Tests for network construction and weights."""

    def test_eight_layer_shapes(self):
        """Test an 8-layer network has 128 activations and 255 angle triples."""
        net = build_network(8, seed=3)
        self.assertEqual(net.z.shape, (128,))
        self.assertEqual(net.angles.shape, (255, 3))
        self.assertTrue(np.all((net.z > 0.4) & (net.z < 0.6)))
        self.assertTrue(np.all(np.abs(net.angles) < np.pi / 4))

    def test_minimal_tree(self):
        """Test a 2-layer network is a single block over two bottom nodes."""
        net = build_network(2, seed=0)
        self.assertEqual(net.n_bottom, 2)
        self.assertEqual(net.n_nodes, 3)
        self.assertEqual(len(net.blocks), 1)

    def test_seed_determinism(self):
        """Test the same seed gives bit-identical networks."""
        a, b = build_network(5, seed=11), build_network(5, seed=11)
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.angles, b.angles)
        self.assertEqual(a.fingerprint(), b.fingerprint())
        self.assertNotEqual(a.fingerprint(), build_network(5, seed=12).fingerprint())

    def test_too_shallow_rejected(self):
        """Test fewer than two layers raise a topology error."""
        with self.assertRaises(TopologyError):
            build_network(1, seed=0)
        with self.assertRaises(TopologyError):
            Network(3, np.ones(3), np.zeros((7, 3)))

    def test_weights_sum_up_the_tree(self):
        """Test each parent weight is the sum of its children and bottom weights are ReLU(z)."""
        rng = np.random.default_rng(0)
        net = Network(4, rng.uniform(-0.5, 1.0, 8), np.zeros((15, 3)))
        np.testing.assert_array_equal(net.weights[-1], np.maximum(net.z, 0))
        for layer in range(3):
            child = net.weights[layer + 1]
            np.testing.assert_allclose(net.weights[layer], child[0::2] + child[1::2])
        self.assertTrue(all(np.all(w >= 0) for w in net.weights))

    def test_parameters_are_read_only(self):
        """Test trainables cannot be mutated in place."""
        net = build_network(3, seed=0)
        with self.assertRaises(ValueError):
            net.z[0] = 1.0

    def test_parameter_vector_round_trip(self):
        """Test flattening and rebuilding keeps the parameters."""
        net = build_network(4, seed=5)
        rebuilt = Network.from_parameter_vector(4, net.parameter_vector())
        np.testing.assert_array_equal(rebuilt.z, net.z)
        np.testing.assert_array_equal(rebuilt.angles, net.angles)

    def test_phase_assignment_alternates(self):
        """Test 1-based odd bottom nodes are matrix and even nodes fiber."""
        self.assertEqual(PhaseAssignment.phase_of(1), MATRIX)
        self.assertEqual(PhaseAssignment.phase_of(2), FIBER)
        mask = PhaseAssignment.fiber_mask(8)
        self.assertEqual(mask.sum(), 4)
        np.testing.assert_array_equal(mask, ~PhaseAssignment.matrix_mask(8))

    def test_active_nodes_and_fiber_fraction(self):
        """Test active node counts and the fiber share of the weight."""
        net = Network(3, [1.0, 3.0, -1.0, 0.0], np.zeros((7, 3)))
        self.assertEqual(net.active_bottom_nodes(), {FIBER: 1, MATRIX: 1})
        self.assertAlmostEqual(net.fiber_fraction(), 0.75)
        self.assertEqual(net.regularization_target(), 2.0)


class BuildingBlockTest(SimpleTestCase):
    """Tests for the two-phase laminate block."""

    def test_identical_phases(self):
        """Test identical phases give A = I and C_bar = C."""
        np.testing.assert_allclose(strain_concentration(C_MATRIX, C_MATRIX, 0.3), np.eye(6), atol=1e-14)
        np.testing.assert_allclose(block_homogenize(C_FIBER, C_FIBER, 0.3), C_FIBER, rtol=1e-12)

    def test_degenerate_fractions(self):
        """Test vf2 = 0 returns phase 1 and vf2 = 1 returns phase 2."""
        np.testing.assert_allclose(block_homogenize(C_MATRIX, C_FIBER, 0.0), C_MATRIX, rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(block_homogenize(C_MATRIX, C_FIBER, 1.0), C_FIBER, rtol=1e-12, atol=1e-9)

    def test_isotropic_phases_match_interface_oracle(self):
        """Test glass/polymer at vf2 = 0.5 against the 12-unknown interface solve."""
        c_bar, a = oracle_block(C_MATRIX, C_FIBER, 0.5)
        self.assertLess(relative(block_homogenize(C_MATRIX, C_FIBER, 0.5), c_bar), 1e-10)
        self.assertLess(relative(strain_concentration(C_MATRIX, C_FIBER, 0.5), a), 1e-10)

    def test_unit_rows_and_mixture_identity(self):
        """Test in-plane rows of A are unit rows and (1 - f) A + f A_p2 = I."""
        rng = np.random.default_rng(7)
        c1, c2 = random_anisotropic_pair(rng)
        solution = interface_solve(c1, c2, 0.35)
        for row in (0, 1, 3):
            np.testing.assert_array_equal(solution.A[row], np.eye(6)[row])
        mixture = 0.65 * solution.A + 0.35 * phase2_concentration(solution)
        np.testing.assert_allclose(mixture, np.eye(6), atol=1e-12)

    def test_random_pairs_match_oracle(self):
        """Test 1000 random anisotropic pairs against the interface oracle."""
        rng = np.random.default_rng(8)
        pairs = [random_anisotropic_pair(rng) for _ in range(1000)]
        fractions = rng.uniform(0.01, 0.99, 1000)
        c1 = np.array([p[1] for p in pairs])
        c2 = np.array([p[0] for p in pairs])
        batched = block_homogenize(c1, c2, fractions)
        for k in range(1000):
            expected, _ = oracle_block(c1[k], c2[k], fractions[k])
            self.assertLess(relative(batched[k], expected), 1e-10)

    def test_result_spd_and_within_bounds(self):
        """Test C_bar is SPD and between the Reuss and Voigt energies."""
        rng = np.random.default_rng(9)
        for _ in range(20):
            c1, c2 = random_anisotropic_pair(rng)
            f = rng.uniform(0.05, 0.95)
            c_bar = block_homogenize(c1, c2, f)
            self.assertTrue(is_spd(c_bar))
            voigt, reuss = voigt_reuss_bounds(c1, c2, f)
            x = rng.normal(size=(100, 6))
            energy = np.einsum('na,ab,nb->n', x, c_bar, x)
            upper = np.einsum('na,ab,nb->n', x, voigt, x)
            lower = np.einsum('na,ab,nb->n', x, reuss, x)
            self.assertTrue(np.all(energy <= upper * (1 + 1e-9) + 1e-9))
            self.assertTrue(np.all(energy >= lower * (1 - 1e-9)))

    def test_singular_interface(self):
        """Test a singular interface block raises a degenerate-interface error."""
        with self.assertRaises(DegenerateInterfaceError):
            strain_concentration(np.zeros((6, 6)), np.zeros((6, 6)), 0.5)

    def test_fraction_out_of_range(self):
        """Test vf2 outside [0, 1] is rejected."""
        with self.assertRaises(ValueError):
            block_homogenize(C_MATRIX, C_FIBER, 1.5)


class ForwardPassTest(SimpleTestCase):
    """Tests for the linear forward pass."""

    def test_single_block(self):
        """Test a 2-layer net with zero angles equals one block."""
        net = Network(2, [0.3, 0.9], np.zeros((3, 3)))
        expected = block_homogenize(C_MATRIX, C_FIBER, 0.9 / 1.2)
        np.testing.assert_allclose(forward_stiffness(net, C_FIBER, C_MATRIX), expected, rtol=1e-12)

    def test_indistinguishable_phases(self):
        """Test identical isotropic phases pass through any network."""
        net = build_network(5, seed=2)
        np.testing.assert_allclose(forward_stiffness(net, C_MATRIX, C_MATRIX), C_MATRIX, rtol=1e-10, atol=1e-9)

    def test_matches_reference_evaluator(self):
        """Test a random 4-layer net against node-by-node evaluation."""
        net = build_network(4, seed=21)
        expected = reference_forward(net, C_FIBER, C_MATRIX)
        self.assertLess(relative(forward_stiffness(net, C_FIBER, C_MATRIX), expected), 1e-10)

    def test_output_spd(self):
        """Test outputs are symmetric positive definite for random nets and phases."""
        rng = np.random.default_rng(10)
        pairs = [generate_phase_pair(rng) for _ in range(50)]
        c_f = np.array([p[0] for p in pairs])
        c_m = np.array([p[1] for p in pairs])
        for seed in range(20):
            top = forward_stiffness(build_network(4, seed), c_f, c_m)
            self.assertEqual(top.shape, (50, 6, 6))
            self.assertTrue(all(is_spd(c) for c in top))

    def test_batch_matches_single(self):
        """Test batched evaluation equals one-by-one evaluation."""
        rng = np.random.default_rng(11)
        pairs = [generate_phase_pair(rng) for _ in range(4)]
        net = build_network(3, seed=1)
        batch = forward_stiffness(net, np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))
        for k, (c_f, c_m) in enumerate(pairs):
            np.testing.assert_allclose(batch[k], forward_stiffness(net, c_f, c_m), rtol=1e-13)

    def test_pruned_nodes_match_pruned_tree(self):
        """Test dead bottom nodes and dead subtrees are skipped exactly."""
        base = build_network(4, seed=4)
        z = np.array(base.z)
        z[[1, 4, 5]] = -0.2
        net = base.with_parameters(z, base.angles)
        expected = reference_forward(net, C_FIBER, C_MATRIX)
        self.assertLess(relative(forward_stiffness(net, C_FIBER, C_MATRIX), expected), 1e-12)
        _, records = forward_with_record(net, C_FIBER, C_MATRIX)
        self.assertTrue(records[2].dead_left[2] and records[2].dead_right[2])
        np.testing.assert_array_equal(net.blocks[2].live_index, [1, 3])
        np.testing.assert_array_equal(net.blocks[1].live_index, [0])
        self.assertEqual(records[2].solution.A.shape[1], 2)
        self.assertEqual(records[1].solution.A.shape[1], 1)

    def test_empty_network(self):
        """Test a network with no active node raises an empty-network error."""
        net = Network(3, -np.ones(4), np.zeros((7, 3)))
        with self.assertRaises(EmptyNetworkError):
            forward_stiffness(net, C_FIBER, C_MATRIX)
