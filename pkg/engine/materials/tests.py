import numpy as np
from django.test import SimpleTestCase

from config.exceptions import IncompressibilityError, MaterialParameterError
from mechanics.mandel import DEVIATORIC_PROJECTOR, lame_constants
from .hardening import ExponentialHardening, PiecewiseLinearHardening, yield_stress
from .laws import (
    PRESETS,
    SQRT_2_3,
    ElasticLaw,
    J2Law,
    MaterialPoint,
    MaterialState,
    material_update,
    polymer_matrix_rve,
    polymer_matrix_structural,
)
from .serializers import build_materials

STRUCTURAL = ExponentialHardening(h0=140.0, s1=120.0, s2=0.0, s3=90.0)
SHEAR_DIRECTION = np.array([1.0, -1.0, 0.0, 0.0, 0.0, 0.0]) / np.sqrt(2.0)


class HardeningTest(SimpleTestCase):
    """Tests for the hardening laws."""

    def test_exponential_curve(self):
        """Test initial yield, saturation and slope of the exponential law."""
        self.assertAlmostEqual(float(STRUCTURAL.yield_stress(0.0)), 30.0, places=12)
        self.assertLessEqual(abs(float(STRUCTURAL.yield_stress(0.2)) - 120.0), 1e-6)
        self.assertAlmostEqual(float(STRUCTURAL.slope(0.0)), 90.0 * 140.0, places=9)

    def test_exponential_needs_positive_initial_yield(self):
        """Test s1 <= s3 is rejected."""
        with self.assertRaises(MaterialParameterError):
            ExponentialHardening(h0=10.0, s1=10.0, s2=0.0, s3=20.0)

    def test_table_interpolation_and_extrapolation(self):
        """Test tables interpolate linearly and extend their last segment."""
        table = PiecewiseLinearHardening.from_rows([[0.0, 10.0], [0.1, 20.0], [0.3, 25.0]])
        np.testing.assert_allclose(table.yield_stress([0.05, 0.2, 0.5]), [15.0, 22.5, 30.0])
        np.testing.assert_allclose(table.slope([0.05, 0.2, 0.5]), [100.0, 25.0, 25.0])

    def test_single_point_is_perfectly_plastic(self):
        """Test a one-row table keeps the yield stress constant."""
        table = PiecewiseLinearHardening((0.0,), (0.63,))
        np.testing.assert_array_equal(table.yield_stress([0.0, 1.0]), [0.63, 0.63])
        np.testing.assert_array_equal(table.slope([0.0, 1.0]), [0.0, 0.0])

    def test_invalid_tables(self):
        """Test unsorted, mismatched and non-positive tables are rejected."""
        with self.assertRaises(MaterialParameterError):
            PiecewiseLinearHardening((0.1, 0.0), (10.0, 20.0))
        with self.assertRaises(MaterialParameterError):
            PiecewiseLinearHardening((0.0, 0.1), (10.0,))
        with self.assertRaises(MaterialParameterError):
            PiecewiseLinearHardening((0.0,), (0.0,))

    def test_negative_plastic_strain(self):
        """Test yield stress is undefined for negative plastic strain."""
        with self.assertRaises(MaterialParameterError):
            yield_stress(-0.1, STRUCTURAL)


class ElasticLawTest(SimpleTestCase):
    """Tests for linear elasticity."""

    def test_update_is_linear(self):
        """Test the stress increment is C deps with a zero correction."""
        law = ElasticLaw(E=72000.0, nu=0.2)
        deps = np.array([1e-3, 0.0, -2e-4, 1e-4, 0.0, 3e-4])
        result = law.update(MaterialState.zeros(), deps)
        np.testing.assert_allclose(result.dsig, law.stiffness @ deps, rtol=1e-14)
        np.testing.assert_array_equal(result.correction, np.zeros(6))
        np.testing.assert_array_equal(result.tangent, law.stiffness)

    def test_invalid_constants(self):
        """Test out-of-range Poisson ratios and densities are rejected."""
        with self.assertRaises(IncompressibilityError):
            ElasticLaw(E=1000.0, nu=0.5)
        with self.assertRaises(MaterialParameterError):
            ElasticLaw(E=1000.0, nu=0.3, density=-1.0)


class J2LawTest(SimpleTestCase):
    """Tests for von Mises plasticity with radial return."""

    def test_bilinear_shear_response(self):
        """Test a deviatoric strain path follows the closed-form bilinear curve."""
        s1, s2 = 50.0, 800.0
        law = J2Law(E=2000.0, nu=0.3, hardening=ExponentialHardening(h0=0.0, s1=s1, s2=s2, s3=0.0))
        mu = lame_constants(law.E, law.nu)[1]
        e_yield = SQRT_2_3 * s1 / (2.0 * mu)
        slope = 2.0 * mu * (2.0 / 3.0 * s2) / (2.0 * mu + 2.0 / 3.0 * s2)
        point = MaterialPoint(law)
        step = 2e-3
        for k in range(1, 41):
            _, _, _, point = material_update(point, step * SHEAR_DIRECTION)
            e = k * step
            expected = 2.0 * mu * e if e <= e_yield else SQRT_2_3 * s1 + slope * (e - e_yield)
            np.testing.assert_allclose(point.state.stress, expected * SHEAR_DIRECTION, rtol=1e-10, atol=1e-10)

    def test_stays_on_yield_surface(self):
        """Test random strain paths never leave the yield surface."""
        rng = np.random.default_rng(0)
        law = polymer_matrix_structural()
        state = MaterialState.zeros((50,))
        for _ in range(20):
            result = law.update(state, rng.normal(scale=5e-3, size=(50, 6)))
            state = result.state
            s_y = law.hardening.yield_stress(state.eps_p)
            q = np.linalg.norm(state.stress @ DEVIATORIC_PROJECTOR, axis=-1)
            self.assertTrue(np.all(q <= SQRT_2_3 * s_y + 1e-8 * s_y))
            self.assertTrue(np.all(state.eps_p >= 0))

    def test_tangent_matches_finite_differences(self):
        """Test the algorithmic tangent against central differences in a plastic step."""
        law = polymer_matrix_structural()
        state = law.update(MaterialState.zeros(), np.array([0.02, -0.005, -0.005, 0.004, 0.0, 0.0])).state
        deps = np.array([4e-3, -1e-3, 5e-4, 2e-3, 1e-3, -1e-3])
        result = law.update(state, deps)
        self.assertGreater(float(result.state.eps_p), float(state.eps_p))
        h = 1e-8
        numeric = np.empty((6, 6))
        for k in range(6):
            up = law.update(state, deps + h * np.eye(6)[k]).state.stress
            down = law.update(state, deps - h * np.eye(6)[k]).state.stress
            numeric[:, k] = (up - down) / (2.0 * h)
        np.testing.assert_allclose(result.tangent, numeric, rtol=1e-5, atol=1e-5 * np.abs(numeric).max())
        np.testing.assert_allclose(result.correction, result.dsig - result.tangent @ deps, atol=1e-10)

    def test_unloading_is_elastic(self):
        """Test reversing a plastic shear unloads with the elastic stiffness and frozen plastic strain."""
        law = polymer_matrix_structural()
        state = MaterialState.zeros()
        deps = 2e-3 * SHEAR_DIRECTION
        for _ in range(10):
            state = law.update(state, deps).state
        self.assertGreater(float(state.eps_p), 0.0)
        for _ in range(3):
            update = law.update(state, -0.2 * deps)
            np.testing.assert_allclose(update.dsig, law.stiffness @ (-0.2 * deps), rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(update.tangent, law.stiffness, rtol=0, atol=1e-12)
            self.assertEqual(float(update.state.eps_p), float(state.eps_p))
            np.testing.assert_array_equal(update.state.plastic_strain, state.plastic_strain)
            state = update.state

    def test_dissipation_is_non_negative(self):
        """Test every step of a random path dissipates sigma : d(plastic strain) >= 0."""
        law = polymer_matrix_structural()
        rng = np.random.default_rng(12)
        state = MaterialState.zeros()
        for step in range(200):
            update = law.update(state, rng.normal(scale=2e-3, size=6))
            dissipation = float(update.state.stress @ (update.state.plastic_strain - state.plastic_strain))
            self.assertGreaterEqual(dissipation, -1e-12, msg=f'step {step}')
            state = update.state
        self.assertGreater(float(state.eps_p), 0.0)

    def test_perfect_plasticity(self):
        """Test the single-point table caps the von Mises stress."""
        law = polymer_matrix_rve()
        point = MaterialPoint(law)
        for _ in range(10):
            _, _, _, point = material_update(point, 1e-3 * SHEAR_DIRECTION)
        q = np.linalg.norm(point.state.stress @ DEVIATORIC_PROJECTOR)
        self.assertAlmostEqual(q, SQRT_2_3 * 0.63, places=10)

    def test_update_is_pure(self):
        """Test updates leave the input state untouched."""
        law = polymer_matrix_structural()
        state = MaterialState.zeros()
        law.update(state, 0.05 * SHEAR_DIRECTION)
        np.testing.assert_array_equal(state.stress, np.zeros(6))


class MaterialSerializerTest(SimpleTestCase):
    """Tests for material configuration blocks."""

    def test_presets(self):
        """Test every preset builds an elastic fiber and a plastic matrix."""
        for name in PRESETS:
            fiber, matrix = build_materials({'preset': name})
            self.assertIsInstance(fiber, ElasticLaw)
            self.assertIsInstance(matrix, J2Law)

    def test_explicit_blocks(self):
        """Test explicit fiber and matrix blocks with table hardening."""
        fiber, matrix = build_materials({
            'fiber': {'law': 'elastic', 'E': 72000, 'nu': 0.2},
            'matrix': {'law': 'j2', 'E': 1616, 'nu': 0.3545,
                       'hardening': {'type': 'table', 'table': [[0.0, 0.63], [0.1, 1.0]]}},
        })
        self.assertEqual(fiber.E, 72000.0)
        self.assertEqual(matrix.hardening.stresses, (0.63, 1.0))

    def test_invalid_blocks(self):
        """Test missing hardening, missing parameters and lone blocks are rejected."""
        payloads = [
            {'fiber': {'law': 'elastic', 'E': 1, 'nu': 0.2}},
            {'fiber': {'law': 'elastic', 'E': 1, 'nu': 0.2}, 'matrix': {'law': 'j2', 'E': 1, 'nu': 0.3}},
            {'fiber': {'law': 'elastic', 'E': 1, 'nu': 0.2},
             'matrix': {'law': 'j2', 'E': 1, 'nu': 0.3, 'hardening': {'type': 'exponential', 's1': 3}}},
            {'preset': 'unknown'},
        ]
        for payload in payloads:
            with self.assertRaises(MaterialParameterError):
                build_materials(payload)
