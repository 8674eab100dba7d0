import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from config.exceptions import CFLViolationError, ConfigurationError, MeshFileError, MicrostructureFileError
from materials.laws import ElasticLaw, glass_fiber_structural, polymer_matrix_rve, polymer_matrix_structural, short_glass_fiber
from mechanics.mandel import mandel_to_tensor, tensor_to_mandel
from network.forward import forward_stiffness
from network.testing import rod_network
from network.topology import build_network
from online.driver import run_point_simulation
from transfer.orientation import OrientationTensor
from transfer.regression import ANCHOR_DESCRIPTORS, Anchor, fit_anchor_regression
from .mesh import GAUSS_WEIGHTS, HEX_CORNERS, box_mesh, element_kinematics, element_volume, load_mesh
from .microstructure import MicrostructureField, load_microstructure_field
from .serializers import parse_scenario
from .solver import (
    BoundaryCondition,
    SimConfig,
    assemble_internal_force,
    bind_quadrature_points,
    critical_time_step,
    initial_states,
    instantiate_element_networks,
    lumped_mass,
    run_simulation,
    stress_field,
)

UNIT_CUBE = """\
# unit cube
node 1 0 0 0
node 2 1 0 0
node 3 1 1 0
node 4 0 1 0
node 5 0 0 1
node 6 1 0 1
node 7 1 1 1
node 8 0 1 1
hex 10 1 2 3 4 5 6 7 8
nset bottom 1 2 3 4
elset solid 10
"""

ELASTIC_FIBER = ElasticLaw(E=72000.0, nu=0.2, density=2.54e-9)
ELASTIC_MATRIX = ElasticLaw(E=1616.0, nu=0.3545, density=1e-9)


def affine_displacement(mesh, gradient):
    """Node-major DOF vector of u = G x."""
    return (mesh.coords @ np.asarray(gradient).T).ravel()


def mandel_strain(gradient):
    g = np.asarray(gradient, dtype=float)
    return tensor_to_mandel(0.5 * (g + g.T))


def write(directory, name, text):
    path = Path(directory) / name
    path.write_text(text, encoding='utf-8')
    return path


def bar_setup(fiber, matrix, n_elements=2):
    mesh = box_mesh(n_elements, 1, 1, lengths=(float(n_elements), 1.0, 1.0))
    net = build_network(3, seed=8)
    bindings = bind_quadrature_points(mesh, [net] * n_elements, fiber, matrix)
    return mesh, net, bindings


def uniaxial_strain_conditions(speed):
    return [
        BoundaryCondition('all', 'y'),
        BoundaryCondition('all', 'z'),
        BoundaryCondition('xmin', 'x'),
        BoundaryCondition('xmax', 'x', kind='velocity', value=speed),
    ]


class MeshTest(SimpleTestCase):
    """Tests for meshes and hex8 kinematics."""

    def test_box_mesh(self):
        """Test node counts, face sets and volumes of a structured mesh."""
        mesh = box_mesh(2, 1, 1, lengths=(2.0, 1.0, 1.0))
        self.assertEqual((mesh.n_nodes, mesh.n_elements), (12, 2))
        self.assertEqual(len(mesh.node_set('xmin')), 4)
        np.testing.assert_array_equal(mesh.element_dofs(0)[:3], [0, 1, 2])
        self.assertAlmostEqual(element_volume(mesh.element_coords(1)), 1.0, places=12)
        self.assertAlmostEqual(mesh.min_edge_length(0), 1.0)
        with self.assertRaises(MeshFileError):
            mesh.node_set('left')

    def test_quadrature_volume_of_distorted_mesh(self):
        """Test quadrature volumes of distorted elements still add up to the box."""
        mesh = box_mesh(2, 2, 2, lengths=(2.0, 2.0, 2.0))
        mesh.coords[13] += [0.2, -0.1, 0.15]
        total = 0.0
        for e in range(mesh.n_elements):
            _, det_j, shapes = element_kinematics(mesh.element_coords(e))
            total += float(np.dot(GAUSS_WEIGHTS, det_j))
            np.testing.assert_allclose(shapes.sum(axis=1), np.ones(8), atol=1e-15)
        self.assertLessEqual(abs(total - 8.0), 1e-10 * 8.0)

    def test_load_mesh(self):
        """Test node, hex and set records of a mesh file."""
        with tempfile.TemporaryDirectory() as tmp:
            mesh = load_mesh(write(tmp, 'cube.mesh', UNIT_CUBE))
        self.assertEqual(mesh.n_elements, 1)
        np.testing.assert_array_equal(mesh.element_ids, [10])
        np.testing.assert_array_equal(mesh.node_set('bottom'), [0, 1, 2, 3])
        np.testing.assert_array_equal(mesh.element_sets['solid'], [0])

    def test_mesh_errors_name_lines(self):
        """Test malformed records report their line numbers."""
        cases = [
            (UNIT_CUBE.replace('node 3 1 1 0', 'node 3 1 1'), 4),
            (UNIT_CUBE.replace('nset bottom', 'group bottom'), 11),
            (UNIT_CUBE.replace('hex 10 1 2 3 4 5 6 7 8', 'hex 10 1 2 3 4 5 6 7 9'), 10),
            (UNIT_CUBE.replace('node 8 0 1 1', 'node 8 0 one 1'), 9),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            for text, line in cases:
                with self.assertRaises(MeshFileError) as ctx:
                    load_mesh(write(tmp, 'bad.mesh', text))
                self.assertEqual(ctx.exception.line, line)

    def test_inverted_element(self):
        """Test an element with negative Jacobian is rejected with its id."""
        text = UNIT_CUBE.replace('hex 10 1 2 3 4 5 6 7 8', 'hex 10 5 6 7 8 1 2 3 4')
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaisesRegex(MeshFileError, 'element 10'):
                load_mesh(write(tmp, 'bad.mesh', text))


class MicrostructureFieldTest(SimpleTestCase):
    """Tests for per-element microstructure files."""

    def setUp(self):
        self.mesh = box_mesh(3, 1, 1, lengths=(3.0, 1.0, 1.0))

    def test_rows_by_element_id(self):
        """Test rows are matched by element id and traces are renormalized."""
        text = (
            '# orientation per element\n'
            'elem,axx,ayy,azz,axy,ayz,azx,vf\n'
            '3,1.0,0.0,0.0,0,0,0,0.2\n'
            '1,0.5861,0.3521,0.0618,0.05447,-0.0172,-0.0159,0.194\n'
            '2,0.3336,0.3336,0.3334,0,0,0,0.1\n'
        )
        with tempfile.TemporaryDirectory() as tmp:
            field = load_microstructure_field(write(tmp, 'micro.csv', text), self.mesh)
        self.assertEqual(len(field), 3)
        a, vf = field[0]
        self.assertEqual(vf, 0.194)
        self.assertAlmostEqual(field[1][0].trace, 1.0, places=14)
        np.testing.assert_array_equal(field[2][0].a, np.diag([1.0, 0.0, 0.0]))

    def test_rows_in_element_order(self):
        """Test files without an elem column follow element order."""
        text = 'axx,ayy,azz,axy,ayz,azx,vf\n' + '1,0,0,0,0,0,0.1\n' * 3
        with tempfile.TemporaryDirectory() as tmp:
            field = load_microstructure_field(write(tmp, 'micro.csv', text), self.mesh)
        self.assertEqual(len(set(field.keys())), 1)

    def test_errors_name_lines(self):
        """Test bad traces and volume fractions report their file lines."""
        header = '# comment\nelem,axx,ayy,azz,axy,ayz,azx,vf\n'
        good = '1,1,0,0,0,0,0,0.1\n'
        cases = [
            (header + good + '2,0.9,0,0,0,0,0,0.1\n3,1,0,0,0,0,0,0.1\n', 4),
            (header + good + '2,1,0,0,0,0,0,1.5\n3,1,0,0,0,0,0,0.1\n', 4),
            (header + good + '7,1,0,0,0,0,0,0.1\n', 4),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            for text, line in cases:
                with self.assertRaises(MicrostructureFileError) as ctx:
                    load_microstructure_field(write(tmp, 'micro.csv', text), self.mesh)
                self.assertEqual(ctx.exception.line, line)

    def test_missing_elements_and_rows(self):
        """Test incomplete files are rejected."""
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(MicrostructureFileError):
                load_microstructure_field(write(tmp, 'a.csv', 'elem,axx,ayy,azz,axy,ayz,azx,vf\n1,1,0,0,0,0,0,0.1\n'), self.mesh)
            with self.assertRaises(MicrostructureFileError):
                load_microstructure_field(write(tmp, 'b.csv', 'axx,ayy,azz,axy,ayz,azx,vf\n1,0,0,0,0,0,0.1\n'), self.mesh)

    def test_equal_microstructures_share_networks(self):
        """Test elements with equal microstructure get one network instance."""
        anchors = fit_anchor_regression([Anchor(d, build_network(3, k)) for k, d in enumerate(ANCHOR_DESCRIPTORS)])
        field = MicrostructureField.uniform(3, OrientationTensor(np.diag([1.0, 0.0, 0.0])), 0.2)
        networks = instantiate_element_networks(field, anchors)
        self.assertIs(networks[0], networks[2])


class AssemblyTest(SimpleTestCase):
    """Tests for quadrature-point updates and internal force assembly."""

    def test_zero_increment_gives_zero_force(self):
        """Test a zero displacement increment leaves stress-free points at zero force."""
        mesh, _, bindings = bar_setup(ELASTIC_FIBER, ELASTIC_MATRIX)
        states = initial_states(bindings, ELASTIC_FIBER, ELASTIC_MATRIX)
        force, _ = assemble_internal_force(mesh, bindings, states, np.zeros(3 * mesh.n_nodes))
        np.testing.assert_array_equal(force, np.zeros(3 * mesh.n_nodes))

    def test_single_element_forces(self):
        """Test nodal forces of a stretched cube against the closed-form face integrals."""
        mesh = box_mesh(1, 1, 1)
        net = build_network(3, seed=2)
        bindings = bind_quadrature_points(mesh, [net], ELASTIC_FIBER, ELASTIC_MATRIX)
        states = initial_states(bindings, ELASTIC_FIBER, ELASTIC_MATRIX)
        gradient = np.diag([1e-3, 0.0, 0.0])
        force, _ = assemble_internal_force(mesh, bindings, states, affine_displacement(mesh, gradient))
        stiffness = forward_stiffness(net, ELASTIC_FIBER.stiffness, ELASTIC_MATRIX.stiffness)
        sigma = mandel_to_tensor(stiffness @ mandel_strain(gradient))
        expected = 0.25 * HEX_CORNERS @ sigma.T
        got = force.reshape(-1, 3)[mesh.connectivity[0]]
        np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max())

    def test_patch_test(self):
        """Test an affine field gives uniform stress and interior equilibrium."""
        fiber, matrix = glass_fiber_structural(), polymer_matrix_structural()
        mesh = box_mesh(2, 2, 2)
        net = build_network(3, seed=5)
        bindings = bind_quadrature_points(mesh, [net] * 8, fiber, matrix)
        states = initial_states(bindings, fiber, matrix)
        gradient = np.array([[8e-3, 1e-3, 0.0], [2e-3, -3e-3, 1e-3], [0.0, 4e-3, 2e-3]])
        force, new_states = assemble_internal_force(mesh, bindings, states, affine_displacement(mesh, gradient))
        stresses = np.array([s.stress for s in new_states])
        self.assertEqual(len(stresses), 64)
        spread = np.abs(stresses - stresses[0]).max()
        self.assertLessEqual(spread, 1e-10 * np.abs(stresses[0]).max())
        centre = 13
        self.assertLessEqual(np.linalg.norm(force[3 * centre:3 * centre + 3]), 1e-9 * np.linalg.norm(force))

    def test_rigid_motion_is_stress_free(self):
        """Test translations and infinitesimal rotations produce no force."""
        mesh, _, bindings = bar_setup(ELASTIC_FIBER, ELASTIC_MATRIX)
        states = initial_states(bindings, ELASTIC_FIBER, ELASTIC_MATRIX)
        translation = np.tile([0.1, -0.2, 0.3], mesh.n_nodes)
        spin = affine_displacement(mesh, [[0.0, -1e-3, 2e-3], [1e-3, 0.0, -5e-4], [-2e-3, 5e-4, 0.0]])
        for du in (translation, spin):
            force, _ = assemble_internal_force(mesh, bindings, states, du)
            self.assertLessEqual(np.abs(force).max(), 1e-9)

    def test_matches_point_driver(self):
        """Test a homogeneous single-element history reproduces the point simulation."""
        fiber, matrix = glass_fiber_structural(), polymer_matrix_structural()
        mesh = box_mesh(1, 1, 1)
        net = build_network(3, seed=3)
        bindings = bind_quadrature_points(mesh, [net], fiber, matrix)
        states = initial_states(bindings, fiber, matrix)
        step_gradient = np.array([[4e-3, 0.0, 0.0], [0.0, -1e-3, 0.0], [0.0, 0.0, 0.0]])
        for _ in range(5):
            _, states = assemble_internal_force(mesh, bindings, states, affine_displacement(mesh, step_gradient))
        increments = np.tile(mandel_strain(step_gradient), (5, 1))
        history = run_point_simulation(net, fiber, matrix, increments)
        expected = history[['s11', 's22', 's33', 's12', 's23', 's31']].iloc[-1].to_numpy()
        field = stress_field(bindings, mesh, states)
        for _, row in field.iterrows():
            got = row[['s11', 's22', 's33', 's12', 's23', 's31']].to_numpy(dtype=float)
            self.assertLessEqual(np.linalg.norm(got - expected), 1e-8 * np.linalg.norm(expected))
        self.assertGreater(field['eps_hom'].min(), 0.0)

    def test_threads_do_not_change_forces(self):
        """Test threaded assembly is bit-identical to the serial one."""
        fiber, matrix = glass_fiber_structural(), polymer_matrix_structural()
        mesh = box_mesh(2, 2, 1)
        bindings = bind_quadrature_points(mesh, [build_network(3, k) for k in range(4)], fiber, matrix)
        states = initial_states(bindings, fiber, matrix)
        du = affine_displacement(mesh, np.diag([5e-3, -1e-3, 2e-3]))
        serial, _ = assemble_internal_force(mesh, bindings, states, du, threads=1)
        threaded, _ = assemble_internal_force(mesh, bindings, states, du, threads=3)
        np.testing.assert_array_equal(serial, threaded)

    def test_vf_ordering(self):
        """Test the x reaction at a fixed stretch grows with the fiber volume fraction."""
        fiber, matrix = short_glass_fiber(), polymer_matrix_rve()
        anchors = fit_anchor_regression([Anchor(d, rod_network(d.vf)) for d in ANCHOR_DESCRIPTORS])
        mesh = box_mesh(1, 1, 1)
        aligned = OrientationTensor(np.diag([1.0, 0.0, 0.0]))
        du = affine_displacement(mesh, np.diag([1e-3, 0.0, 0.0]))
        xmax = 3 * mesh.node_set('xmax')
        reactions = []
        for vf in (0.08, 0.20, 0.35):
            networks = instantiate_element_networks(MicrostructureField.uniform(1, aligned, vf), anchors)
            bindings = bind_quadrature_points(mesh, networks, fiber, matrix, vf=[vf])
            states = initial_states(bindings, fiber, matrix)
            for _ in range(5):
                force, states = assemble_internal_force(mesh, bindings, states, du)
            reactions.append(force[xmax].sum())
        self.assertTrue(0.0 < reactions[0] < reactions[1] < reactions[2])


class ExplicitDynamicsTest(SimpleTestCase):
    """Tests for the central-difference time loop."""

    def test_lumped_mass(self):
        """Test the lumped mass equals density times volume."""
        mesh, net, bindings = bar_setup(ELASTIC_FIBER, ELASTIC_MATRIX)
        mass = lumped_mass(mesh, bindings)
        density = bindings[0].density
        self.assertAlmostEqual(mass.sum() / 3.0, density * 2.0, delta=1e-12 * density)
        vf = net.fiber_fraction()
        self.assertAlmostEqual(density, vf * 2.54e-9 + (1 - vf) * 1e-9, delta=1e-12 * density)

    def test_stationary_state(self):
        """Test a body at rest without loads stays at rest."""
        mesh, _, bindings = bar_setup(ELASTIC_FIBER, ELASTIC_MATRIX)
        dt = 0.5 * critical_time_step(mesh, bindings, ELASTIC_FIBER, ELASTIC_MATRIX)
        result = run_simulation(mesh, bindings, ELASTIC_FIBER, ELASTIC_MATRIX, SimConfig(dt=dt, t_end=3 * dt))
        np.testing.assert_array_equal(result.state.u, np.zeros(3 * mesh.n_nodes))
        self.assertEqual(result.history['step'].tolist(), [0, 1, 2, 3])
        self.assertEqual(result.history['kinetic_energy'].max(), 0.0)

    def test_quasi_static_bar(self):
        """Test a slowly pulled bar in uniaxial strain reaches the static reaction."""
        mesh, net, bindings = bar_setup(ELASTIC_FIBER, ELASTIC_MATRIX)
        dt_critical = critical_time_step(mesh, bindings, ELASTIC_FIBER, ELASTIC_MATRIX)
        dt = 0.8 * dt_critical
        t_end = 500 * dt
        speed = 1e-3 * 2.0 / t_end
        config = SimConfig(dt=dt, t_end=t_end, boundary_conditions=uniaxial_strain_conditions(speed), output_every=50)
        result = run_simulation(mesh, bindings, ELASTIC_FIBER, ELASTIC_MATRIX, config)
        c11 = forward_stiffness(net, ELASTIC_FIBER.stiffness, ELASTIC_MATRIX.stiffness)[0, 0]
        expected = c11 * speed * result.state.time / 2.0
        reaction = result.history['R_xmax_x'].iloc[-1]
        self.assertLessEqual(abs(reaction - expected), 0.02 * expected)
        self.assertEqual(result.history['step'].iloc[-1], 500)
        self.assertGreater(result.history['internal_work'].iloc[-1], 0.0)

    def test_cfl_violation(self):
        """Test a time step above the stable estimate is refused unless overridden."""
        mesh, _, bindings = bar_setup(ELASTIC_FIBER, ELASTIC_MATRIX)
        dt = 10.0 * critical_time_step(mesh, bindings, ELASTIC_FIBER, ELASTIC_MATRIX)
        with self.assertRaises(CFLViolationError):
            run_simulation(mesh, bindings, ELASTIC_FIBER, ELASTIC_MATRIX, SimConfig(dt=dt, t_end=dt))
        with self.assertLogs('fem.solver', level='WARNING'):
            result = run_simulation(
                mesh, bindings, ELASTIC_FIBER, ELASTIC_MATRIX, SimConfig(dt=dt, t_end=0.0, allow_dt_override=True)
            )
        self.assertEqual(len(result.history), 1)

    def test_restart_is_deterministic(self):
        """Test resuming from a mid-run state reproduces the uninterrupted run bit for bit."""
        fiber = glass_fiber_structural()
        matrix = polymer_matrix_structural()
        mesh, _, bindings = bar_setup(fiber, matrix)
        dt = 0.5 * critical_time_step(mesh, bindings, fiber, matrix)
        conditions = uniaxial_strain_conditions(5e3)
        full = run_simulation(mesh, bindings, fiber, matrix, SimConfig(dt, 10 * dt, conditions))
        half = run_simulation(mesh, bindings, fiber, matrix, SimConfig(dt, 5 * dt, conditions, snapshot_every=5))
        resumed = run_simulation(mesh, bindings, fiber, matrix, SimConfig(dt, 10 * dt, conditions), state=half.state)
        np.testing.assert_array_equal(resumed.state.u, full.state.u)
        np.testing.assert_array_equal(resumed.state.f_int, full.state.f_int)
        pd.testing.assert_frame_equal(
            resumed.history.reset_index(drop=True), full.history.iloc[6:].reset_index(drop=True)
        )
        self.assertEqual(len(half.snapshots), 1)
        self.assertEqual(half.snapshots[0][0], 5)


class ScenarioTest(SimpleTestCase):
    """Tests for scenario files and boundary condition ramps."""

    def test_parse_scenario(self):
        """Test a scenario becomes a simulation config."""
        serializer = parse_scenario({
            'dt': 1e-7, 't_end': 1e-5,
            'boundary_conditions': [
                {'node_set': 'xmin', 'component': 'x'},
                {'node_set': 'xmax', 'component': 'x', 'kind': 'displacement', 'value': 0.1, 'ramp_time': 5e-6},
            ],
            'loads': [{'node_set': 'zmax', 'component': 'z', 'value': -1.0}],
            'initial_velocity': [{'vector': [1.0, 0.0, 0.0]}],
            'materials': {'preset': 'rve'},
        })
        config = serializer.to_config()
        self.assertEqual(config.n_steps, 100)
        self.assertEqual(config.boundary_conditions[1].displacement(2.5e-6, config.t_end), 0.05)
        self.assertEqual(config.boundary_conditions[1].displacement(8e-6, config.t_end), 0.1)
        self.assertEqual(config.initial_velocity[0].node_set, 'all')

    def test_invalid_scenarios(self):
        """Test non-positive steps, unknown components and zero ramps are rejected."""
        for payload in (
            {'dt': 0.0, 't_end': 1.0},
            {'dt': 1.0, 't_end': 1.0, 'boundary_conditions': [{'node_set': 'a', 'component': 'w'}]},
            {'dt': 1.0, 't_end': 1.0, 'boundary_conditions': [{'node_set': 'a', 'component': 'x', 'ramp_time': 0}]},
        ):
            with self.assertRaises(ConfigurationError):
                parse_scenario(payload)
