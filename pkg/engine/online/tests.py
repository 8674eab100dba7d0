import time
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from config.exceptions import EmptyNetworkError, NonConvergenceError
from materials.laws import (
    ElasticLaw,
    MaterialState,
    glass_fiber_structural,
    polymer_matrix_rve,
    polymer_matrix_structural,
    short_glass_fiber,
)
from mechanics.mandel import rotate_stiffness, rotation6
from network.building_block import IN_PLANE, INTERFACE, voigt_reuss_bounds
from network.forward import forward_stiffness
from network.testing import interface_oracle, rod_network
from network.topology import Network, build_network
from training.datasets import generate_phase_pair
from transfer.orientation import OrientationTensor
from transfer.regression import ANCHOR_DESCRIPTORS, Anchor, fit_anchor_regression, instantiate_network
from .affine import affine_block_homogenize, affine_interface, dehomogenize
from .driver import HISTORY_COLUMNS, STRESS_COLUMNS, run_point_simulation, uniaxial_strain_path
from .state import NetworkState, homogenized_eps, network_step

RVE_1 = OrientationTensor.from_components(0.5861, 0.3521, 0.0618, 0.05447, -0.0172, -0.0159)
RVE_2 = OrientationTensor.from_components(0.1353, 0.8036, 0.0611, 0.1504, -0.009521, -0.005788)


def laminate_oracle(fiber, matrix, vf2, increments):
    """
    Stress history of a matrix/fiber laminate (normal along z) solved by Newton per step.

    Phase 1 is the matrix, phase 2 the fiber.
    """
    ratio = (1.0 - vf2) / vf2
    s1, s2 = MaterialState.zeros(), MaterialState.zeros()
    stresses = []
    for deps in increments:
        x = np.array(deps, dtype=float)
        for _ in range(50):
            u1 = matrix.update(s1, x)
            x2 = (deps - (1.0 - vf2) * x) / vf2
            u2 = fiber.update(s2, x2)
            residual = np.zeros(6)
            residual[IN_PLANE] = x[IN_PLANE] - x2[IN_PLANE]
            residual[INTERFACE] = u1.state.stress[INTERFACE] - u2.state.stress[INTERFACE]
            if np.linalg.norm(residual[IN_PLANE]) < 1e-15 and np.linalg.norm(residual[INTERFACE]) < 1e-11:
                break
            jacobian = np.zeros((6, 6))
            jacobian[IN_PLANE] = (1.0 + ratio) * np.eye(6)[IN_PLANE]
            jacobian[INTERFACE] = u1.tangent[INTERFACE] + ratio * u2.tangent[INTERFACE]
            x = x - np.linalg.solve(jacobian, residual)
        s1, s2 = u1.state, u2.state
        stresses.append((1.0 - vf2) * s1.stress + vf2 * s2.stress)
    return np.array(stresses)


class AffineBlockTest(SimpleTestCase):
    """Tests for the affine laminate block."""

    def setUp(self):
        rng = np.random.default_rng(0)
        self.cases = []
        for _ in range(10):
            c_f, c_m = generate_phase_pair(rng)
            c1 = rotate_stiffness(c_m, rng.uniform(-np.pi, np.pi, 3))
            c2 = rotate_stiffness(c_f, rng.uniform(-np.pi, np.pi, 3))
            self.cases.append((c1, rng.normal(size=6), c2, rng.normal(size=6) * 10, rng.uniform(0.05, 0.95),
                               rng.normal(scale=1e-2, size=6)))

    def test_matches_interface_oracle(self):
        """Test stress and phase strains against the dense affine interface solve."""
        for c1, d1, c2, d2, f, eps_bar in self.cases:
            eps1, eps2, sigma = interface_oracle(c1, c2, f, eps_bar, d1, d2)
            block = affine_interface(c1, d1, c2, d2, f)
            stress = block.c_bar @ eps_bar + block.d_bar
            self.assertLessEqual(np.linalg.norm(stress - sigma) / np.linalg.norm(sigma), 1e-10)
            got1, got2 = dehomogenize(eps_bar, block)
            np.testing.assert_allclose(got1, eps1, rtol=1e-9, atol=1e-12 * np.abs(eps1).max())
            np.testing.assert_allclose(got2, eps2, rtol=1e-9, atol=1e-12 * np.abs(eps2).max())

    def test_mixture_identity(self):
        """Test the phase strains always average to the block strain."""
        for c1, d1, c2, d2, f, eps_bar in self.cases:
            eps1, eps2 = dehomogenize(eps_bar, affine_interface(c1, d1, c2, d2, f))
            np.testing.assert_allclose((1.0 - f) * eps1 + f * eps2, eps_bar, atol=1e-12 * max(1.0, np.abs(eps_bar).max()))

    def test_zero_corrections_reduce_to_linear_block(self):
        """Test zero affine terms give a zero block correction."""
        c1, _, c2, _, f, _ = self.cases[0]
        _, d_bar = affine_block_homogenize(c1, np.zeros(6), c2, np.zeros(6), f)
        np.testing.assert_array_equal(d_bar, np.zeros(6))

    def test_dead_child_passes_strain(self):
        """Test a block with a dead child hands its strain through."""
        c1, d1, c2, d2, f, eps_bar = self.cases[0]
        block = affine_interface(c1, d1, c2, d2, f)
        eps1, eps2 = dehomogenize(eps_bar, block, dead_left=np.array(True))
        np.testing.assert_array_equal(eps1, eps_bar)
        np.testing.assert_array_equal(eps2, eps_bar)


class NetworkStepTest(SimpleTestCase):
    """Tests for the nonlinear online step."""

    def test_elastic_phases_follow_linear_network(self):
        """Test elastic phases reproduce the linear forward pass within two sweeps."""
        rng = np.random.default_rng(1)
        for seed in range(100):
            fiber = ElasticLaw(E=rng.uniform(1e3, 1e5), nu=rng.uniform(0.1, 0.4))
            matrix = ElasticLaw(E=rng.uniform(1.0, 1e2), nu=rng.uniform(0.1, 0.45))
            net = build_network(4, seed)
            state = NetworkState.initial(net, fiber, matrix)
            stiffness = forward_stiffness(net, fiber.stiffness, matrix.stiffness)
            for _ in range(5):
                deps = rng.normal(scale=1e-3, size=6)
                result = network_step(state, deps)
                expected = stiffness @ deps
                self.assertLessEqual(np.linalg.norm(result.dsig - expected) / np.linalg.norm(expected), 1e-8)
                self.assertLessEqual(result.iterations, 2)
                state = result.state

    def test_zero_increment(self):
        """Test a zero increment converges at once with no stress change."""
        state = NetworkState.initial(build_network(3, 0), glass_fiber_structural(), polymer_matrix_structural())
        result = network_step(state, np.zeros(6))
        np.testing.assert_array_equal(result.dsig, np.zeros(6))
        self.assertEqual(result.iterations, 1)

    def test_input_state_is_untouched(self):
        """Test a step commits into a new state only."""
        state = NetworkState.initial(build_network(3, 0), glass_fiber_structural(), polymer_matrix_structural())
        result = network_step(state, np.array([0.03, 0.0, 0.0, 0.0, 0.0, 0.0]))
        np.testing.assert_array_equal(state.stress, np.zeros(6))
        np.testing.assert_array_equal(state.matrix_state.eps_p, np.zeros(2))
        self.assertEqual(state.steps, 0)
        self.assertEqual(result.state.steps, 1)
        self.assertTrue(np.any(result.state.matrix_state.eps_p > 0))

    def test_two_layer_plastic_laminate(self):
        """Test a 2-layer J2/elastic network against a Newton-solved laminate over 50 steps."""
        fiber, matrix = glass_fiber_structural(), polymer_matrix_structural()
        net = Network(2, [0.6, 0.4], np.zeros((3, 3)))
        direction = np.array([1.0, 0.0, 0.5, 0.0, 0.0, 0.3])
        increments = np.tile(direction * 0.03 / 50, (50, 1))
        expected = laminate_oracle(fiber, matrix, 0.4, increments)
        state = NetworkState.initial(net, fiber, matrix)
        for step, deps in enumerate(increments):
            state = network_step(state, deps, tol=1e-12, max_iter=200).state
            error = np.linalg.norm(state.stress - expected[step]) / np.linalg.norm(expected[step])
            self.assertLessEqual(error, 1e-6, msg=f'step {step + 1}')
        self.assertGreater(float(state.matrix_state.eps_p[0]), 0.0)

    def test_top_rotation_is_objective(self):
        """Test rotating the root node and the loading together rotates the plastic response."""
        fiber, matrix = glass_fiber_structural(), polymer_matrix_structural()
        base = build_network(3, seed=8)
        theta = np.array([0.7, -0.4, 1.1])
        angles = np.array(base.angles)
        angles[0] = 0.0
        plain = base.with_parameters(base.z, angles)
        angles[0] = theta
        turned = base.with_parameters(base.z, angles)
        r = rotation6(theta)
        increments = np.tile(np.array([1.0, -0.3, 0.2, 0.4, 0.0, 0.1]) * 0.02 / 20, (20, 1))
        s0 = NetworkState.initial(plain, fiber, matrix)
        s1 = NetworkState.initial(turned, fiber, matrix)
        for step, deps in enumerate(increments):
            s0 = network_step(s0, deps, tol=1e-10, max_iter=200).state
            s1 = network_step(s1, r.T @ deps, tol=1e-10, max_iter=200).state
            np.testing.assert_allclose(r @ s1.stress, s0.stress, rtol=1e-6, atol=1e-6 * np.linalg.norm(s0.stress),
                                       err_msg=f'step {step + 1}')
        self.assertGreater(homogenized_eps(s0), 0.0)

    def test_non_convergence(self):
        """Test the iteration cap raises with the final residual."""
        state = NetworkState.initial(build_network(3, 0), glass_fiber_structural(), polymer_matrix_structural())
        with self.assertRaises(NonConvergenceError) as ctx:
            network_step(state, np.full(6, 1e-3), max_iter=1)
        self.assertGreater(ctx.exception.residual, 0.0)

    def test_empty_network(self):
        """Test an online state needs an active node."""
        with self.assertRaises(EmptyNetworkError):
            NetworkState.initial(Network(2, [0.0, -1.0], np.zeros((3, 3))), short_glass_fiber(), polymer_matrix_rve())

    def test_homogenized_plastic_strain(self):
        """Test the plastic strain average is weighted by matrix node weights."""
        net = Network(3, [1.0, 0.5, 3.0, 0.5], np.zeros((7, 3)))
        state = NetworkState.initial(net, short_glass_fiber(), polymer_matrix_rve())
        state = replace(state, matrix_state=MaterialState(np.zeros((2, 6)), np.array([0.1, 0.2]), np.zeros((2, 6))))
        self.assertAlmostEqual(homogenized_eps(state), 0.175, places=15)


class PointDriverTest(SimpleTestCase):
    """Tests for the point-simulation driver."""

    def test_elastic_history(self):
        """Test an elastic history equals the linear stiffness times the accumulated strain."""
        fiber = ElasticLaw(E=72000.0, nu=0.2)
        matrix = ElasticLaw(E=1616.0, nu=0.3545)
        net = build_network(3, 4)
        increments = uniaxial_strain_path(0.01, 5)
        history = run_point_simulation(net, fiber, matrix, increments)
        self.assertEqual(list(history.columns), HISTORY_COLUMNS)
        self.assertEqual(history['step'].tolist(), [1, 2, 3, 4, 5])
        stiffness = forward_stiffness(net, fiber.stiffness, matrix.stiffness)
        np.testing.assert_allclose(history['s11'].iloc[-1], stiffness[0, 0] * 0.01, rtol=1e-8)
        np.testing.assert_allclose(history['s12'].iloc[-1], stiffness[3, 0] * 0.01 / np.sqrt(2.0), rtol=1e-6, atol=1e-9)
        self.assertEqual(history['eps_hom'].max(), 0.0)

    def test_halved_increments_agree(self):
        """Test splitting every increment in two barely moves the final plastic stress."""
        net = build_network(3, seed=2)
        fiber, matrix = glass_fiber_structural(), polymer_matrix_structural()
        increments = np.tile(np.array([1.0, 0.0, 0.5, 0.0, 0.0, 0.3]) * 0.03 / 50, (50, 1))
        coarse = run_point_simulation(net, fiber, matrix, increments)
        fine = run_point_simulation(net, fiber, matrix, np.repeat(increments / 2.0, 2, axis=0))
        self.assertEqual(len(fine), 100)
        last_coarse = coarse[STRESS_COLUMNS].iloc[-1].to_numpy()
        last_fine = fine[STRESS_COLUMNS].iloc[-1].to_numpy()
        self.assertGreater(coarse['eps_hom'].iloc[-1], 0.0)
        self.assertLessEqual(np.linalg.norm(last_coarse - last_fine) / np.linalg.norm(last_fine), 1e-2)

    def test_eight_layer_path_runs_within_a_second(self):
        """Test a 100-step plastic path through an 8-layer network stays within a second."""
        net = build_network(8, seed=1)
        fiber, matrix = glass_fiber_structural(), polymer_matrix_structural()
        increments = uniaxial_strain_path(0.02, 100)
        state = network_step(NetworkState.initial(net, fiber, matrix), increments[0]).state
        start = time.perf_counter()
        single = network_step(state, increments[1])
        per_step = time.perf_counter() - start
        self.assertGreater(single.iterations, 0)
        start = time.perf_counter()
        history = run_point_simulation(net, fiber, matrix, increments)
        elapsed = time.perf_counter() - start
        self.assertEqual(len(history), 100)
        self.assertLessEqual(per_step, 5e-3)
        self.assertLessEqual(elapsed, 1.0)

    def test_failure_carries_step(self):
        """Test a failing step is reported with its step number."""
        net = build_network(3, 0)
        with self.assertRaises(NonConvergenceError) as ctx:
            run_point_simulation(net, glass_fiber_structural(), polymer_matrix_structural(),
                                 uniaxial_strain_path(0.05, 2), max_iter=1)
        self.assertEqual(ctx.exception.location, 'step 1')

    def test_microstructure_ordering(self):
        """Test the more x-aligned microstructure responds stiffer along x."""
        anchors = [Anchor(d, rod_network(d.vf)) for d in ANCHOR_DESCRIPTORS]
        anchor_set = fit_anchor_regression(anchors)
        fiber, matrix = short_glass_fiber(), polymer_matrix_rve()
        increments = uniaxial_strain_path(0.005, 10)
        secant = {}
        for name, tensor, vf in (('rve1', RVE_1, 0.194), ('rve2', RVE_2, 0.240)):
            net = instantiate_network(anchor_set, tensor, vf)
            history = run_point_simulation(net, fiber, matrix, increments)
            secant[name] = history['s11'].iloc[-1] / 0.005
            elastic = forward_stiffness(net, fiber.stiffness, matrix.stiffness)
            voigt, reuss = voigt_reuss_bounds(matrix.stiffness, fiber.stiffness, net.fiber_fraction())
            self.assertLessEqual(elastic[0, 0], voigt[0, 0] * (1 + 1e-9))
            self.assertGreaterEqual(elastic[0, 0], reuss[0, 0] * (1 - 1e-9))
            self.assertLessEqual(secant[name], voigt[0, 0])
            self.assertGreater(secant[name], 0.0)
        self.assertGreater(secant['rve1'], secant['rve2'])
