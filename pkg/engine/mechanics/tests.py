import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy.spatial.transform import Rotation

from config.exceptions import IncompressibilityError, MaterialParameterError, SingularStiffnessError, SymmetryViolationError
from .mandel import (
    compose_angles,
    inverse_angles,
    is_spd,
    isotropic_stiffness,
    lame_constants,
    mandel_rotation,
    mandel_to_tensor,
    orthotropic_stiffness,
    rotate_stiffness,
    rotate_vector,
    rotation6,
    rotation6_with_derivatives,
    rotation_matrix,
    stiffness_to_tensor4,
    tensor4_to_stiffness,
    tensor_to_mandel,
)
from .surface import SURFACE_COLUMNS, directional_modulus, modulus_surface, modulus_surface_frame, plot_modulus_surface


def random_symmetric(rng, n=None):
    shape = (3, 3) if n is None else (n, 3, 3)
    a = rng.normal(size=shape)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def ud_like_stiffness():
    return orthotropic_stiffness((70000.0, 4000.0, 4000.0), (1500.0, 1400.0, 1500.0), (0.3, 0.4, 0.3))


class MandelConversionTest(SimpleTestCase):
    """Tests for tensor <-> Mandel vector conversion."""

    def test_identity(self):
        """Test the identity maps to ones on the normal components."""
        np.testing.assert_array_equal(tensor_to_mandel(np.eye(3)), [1, 1, 1, 0, 0, 0])

    def test_pure_shear_carries_sqrt2(self):
        """Test a 12 shear of size s becomes sqrt(2) s."""
        t = np.zeros((3, 3))
        t[0, 1] = t[1, 0] = 2.5
        np.testing.assert_allclose(tensor_to_mandel(t), [0, 0, 0, np.sqrt(2) * 2.5, 0, 0])

    def test_inner_product_is_double_contraction(self):
        """Test Mandel dot products equal double contractions for 1000 random pairs."""
        rng = np.random.default_rng(1)
        a = random_symmetric(rng, 1000)
        b = random_symmetric(rng, 1000)
        dots = np.einsum('na,na->n', tensor_to_mandel(a), tensor_to_mandel(b))
        contractions = np.einsum('nij,nij->n', a, b)
        np.testing.assert_allclose(dots, contractions, rtol=1e-12, atol=1e-12)

    def test_round_trip(self):
        """Test tensor -> Mandel -> tensor is exact."""
        t = random_symmetric(np.random.default_rng(2))
        np.testing.assert_allclose(mandel_to_tensor(tensor_to_mandel(t)), t, rtol=0, atol=1e-15)

    def test_asymmetric_tensor_rejected(self):
        """Test non-symmetric input raises a symmetry violation."""
        t = np.eye(3)
        t[0, 1] = 1e-3
        with self.assertRaises(SymmetryViolationError):
            tensor_to_mandel(t)

    def test_stiffness_tensor_round_trip(self):
        """Test 6x6 -> 3x3x3x3 -> 6x6 keeps the matrix."""
        c = ud_like_stiffness()
        np.testing.assert_allclose(tensor4_to_stiffness(stiffness_to_tensor4(c)), c, rtol=1e-14)


class RotationTest(SimpleTestCase):
    """Tests for Euler angle rotations in the Mandel basis."""

    def test_zero_angles_give_identity(self):
        """Test (0, 0, 0) is the 6x6 identity."""
        np.testing.assert_allclose(rotation6((0.0, 0.0, 0.0)), np.eye(6), atol=1e-15)

    def test_half_turn_is_involution(self):
        """Test a half turn about z applied twice is the identity."""
        r = rotation6((np.pi, 0.0, 0.0))
        np.testing.assert_allclose(r @ r, np.eye(6), atol=1e-12)

    def test_matches_intrinsic_zxz_convention(self):
        """Test the 3x3 generator matches scipy's intrinsic ZXZ rotation."""
        angles = (0.3, -1.1, 2.0)
        q = Rotation.from_euler('ZXZ', angles).as_matrix()
        np.testing.assert_allclose(rotation_matrix(angles), q, atol=1e-14)
        np.testing.assert_allclose(rotation6(angles), mandel_rotation(q), atol=1e-14)

    def test_orthogonal(self):
        """Test R^T R = I for random angles."""
        rng = np.random.default_rng(3)
        r = rotation6(rng.uniform(-np.pi, np.pi, size=(50, 3)))
        np.testing.assert_allclose(np.swapaxes(r, -1, -2) @ r, np.broadcast_to(np.eye(6), r.shape), atol=1e-12)

    def test_rotates_tensors(self):
        """Test R mandel(t) = mandel(Q t Q^T)."""
        rng = np.random.default_rng(4)
        angles = rng.uniform(-np.pi, np.pi, 3)
        q = rotation_matrix(angles)
        t = random_symmetric(rng)
        np.testing.assert_allclose(rotate_vector(tensor_to_mandel(t), angles), tensor_to_mandel(q @ t @ q.T), atol=1e-12)

    def test_composition(self):
        """Test rotation6(e1) rotation6(e2) = rotation6(compose(e1, e2))."""
        e1, e2 = (0.4, 0.9, -0.2), (-1.3, 0.5, 2.2)
        np.testing.assert_allclose(rotation6(e1) @ rotation6(e2), rotation6(compose_angles(e1, e2)), atol=1e-12)

    def test_inverse_restores_stiffness(self):
        """Test rotating by e and then by its inverse restores C."""
        c = ud_like_stiffness()
        e = (0.7, -0.4, 1.9)
        back = rotate_stiffness(rotate_stiffness(c, e), inverse_angles(e))
        np.testing.assert_allclose(back, c, rtol=1e-12, atol=1e-12 * np.abs(c).max())

    def test_matches_componentwise_rotation(self):
        """Test R^T C R against the component-wise fourth-order transformation."""
        c = ud_like_stiffness()
        e = (0.2, 1.0, -0.6)
        q = rotation_matrix(e)
        oracle = np.einsum('ai,bj,ck,dl,abcd->ijkl', q, q, q, q, stiffness_to_tensor4(c))
        np.testing.assert_allclose(rotate_stiffness(c, e), tensor4_to_stiffness(oracle), atol=1e-9 * np.abs(c).max())

    def test_quarter_turn_swaps_axes(self):
        """Test 90 degrees about axis 3 swaps the 11 and 22 entries."""
        c = ud_like_stiffness()
        rotated = rotate_stiffness(c, (np.pi / 2, 0.0, 0.0))
        self.assertAlmostEqual(rotated[0, 0], c[1, 1], delta=1e-8 * c[0, 0])
        self.assertAlmostEqual(rotated[1, 1], c[0, 0], delta=1e-8 * c[0, 0])
        self.assertAlmostEqual(rotated[2, 2], c[2, 2], delta=1e-8 * c[0, 0])

    def test_isotropic_invariant_and_eigenvalues_kept(self):
        """Test isotropic C is unchanged and eigenvalues are preserved for any C."""
        c_iso = isotropic_stiffness(1616.0, 0.3545)
        e = (1.2, 0.3, -2.5)
        np.testing.assert_allclose(rotate_stiffness(c_iso, e), c_iso, atol=1e-10 * c_iso.max())
        c = ud_like_stiffness()
        np.testing.assert_allclose(
            np.linalg.eigvalsh(rotate_stiffness(c, e)), np.linalg.eigvalsh(c), rtol=1e-9,
        )
        np.testing.assert_array_equal(rotate_stiffness(c, (0.0, 0.0, 0.0)), c)

    def test_derivatives_match_finite_differences(self):
        """Test dR/d(angle) against central differences."""
        angles = np.array([0.3, 0.8, -0.5])
        _, dr = rotation6_with_derivatives(angles)
        h = 1e-6
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            numeric = (rotation6(angles + step) - rotation6(angles - step)) / (2 * h)
            np.testing.assert_allclose(dr[k], numeric, atol=1e-8)


class StiffnessTest(SimpleTestCase):
    """Tests for elastic stiffness construction."""

    def test_isotropic_eigenvalues(self):
        """Test eigenvalues are 3 kappa once and 2 mu five times."""
        for E, nu in ((1616.0, 0.3545), (72000.0, 0.20)):
            lam, mu = lame_constants(E, nu)
            kappa = lam + 2 * mu / 3
            values = np.sort(np.linalg.eigvalsh(isotropic_stiffness(E, nu)))
            expected = np.sort([3 * kappa] + [2 * mu] * 5)
            np.testing.assert_allclose(values, expected, rtol=1e-12)
            self.assertTrue(is_spd(isotropic_stiffness(E, nu)))

    def test_zero_poisson(self):
        """Test (E, nu) = (1, 0) gives mu = 0.5 and kappa = 1/3."""
        c = isotropic_stiffness(1.0, 0.0)
        np.testing.assert_allclose(c, np.eye(6), atol=1e-15)

    def test_incompressible_rejected(self):
        """Test nu >= 0.5 raises an incompressibility error."""
        with self.assertRaises(IncompressibilityError):
            isotropic_stiffness(100.0, 0.5)
        with self.assertRaises(MaterialParameterError):
            isotropic_stiffness(-1.0, 0.3)

    def test_orthotropic_axial_moduli(self):
        """Test the compliance diagonal returns the axial moduli."""
        c = orthotropic_stiffness((10.0, 2.0, 1.0), (1.0, 0.5, 0.7), (0.2, 0.1, 0.3))
        np.testing.assert_allclose(1.0 / np.diag(np.linalg.inv(c))[:3], (10.0, 2.0, 1.0), rtol=1e-12)
        self.assertTrue(is_spd(c))

    def test_indefinite_not_spd(self):
        """Test an indefinite matrix fails the SPD check."""
        m = np.eye(6)
        m[0, 0] = -1.0
        self.assertFalse(is_spd(m))


class ModulusSurfaceTest(SimpleTestCase):
    """Tests for directional Young's modulus surfaces."""

    def test_isotropic_surface_is_sphere(self):
        """Test E(d) = E everywhere for isotropic C."""
        surface = modulus_surface(isotropic_stiffness(3800.0, 0.39), 9, 12)
        self.assertEqual(len(surface), 9 * 12)
        np.testing.assert_allclose([e for _, e in surface], 3800.0, rtol=1e-9)

    def test_fiber_axis_is_stiffest(self):
        """Test the maximum modulus of a UD-like C lies along axis 1."""
        frame = modulus_surface_frame(ud_like_stiffness(), 19, 36)
        self.assertEqual(list(frame.columns), SURFACE_COLUMNS)
        best = frame.loc[frame['E_MPa'].idxmax()]
        self.assertAlmostEqual(abs(best['nx']), 1.0, places=6)
        self.assertTrue((frame['E_MPa'] > 0).all())

    def test_surface_rotates_with_stiffness(self):
        """Test E_rotated(d) = E(Q d)."""
        c = ud_like_stiffness()
        e = (0.5, 1.1, -0.3)
        q = rotation_matrix(e)
        d = np.random.default_rng(5).normal(size=(20, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        np.testing.assert_allclose(
            directional_modulus(rotate_stiffness(c, e), d), directional_modulus(c, d @ q.T), rtol=1e-9,
        )

    def test_singular_stiffness_rejected(self):
        """Test a singular matrix raises an inversion error."""
        with self.assertRaises(SingularStiffnessError):
            directional_modulus(np.zeros((6, 6)), np.array([[1.0, 0.0, 0.0]]))

    def test_plot_written(self):
        """Test the surface plot is rendered to a PNG file."""
        frame = modulus_surface_frame(ud_like_stiffness(), 7, 8)
        with tempfile.TemporaryDirectory() as tmp:
            path = plot_modulus_surface(frame, 7, 8, Path(tmp) / 'surface.png')
            self.assertTrue(path.is_file())
            self.assertGreater(path.stat().st_size, 0)
