import tempfile

import numpy as np
from django.test import SimpleTestCase
from scipy.linalg import eigvalsh

from config.exceptions import AnchorDegeneracyError, ConfigurationError, InvalidOrientationError, TopologyError
from mechanics.mandel import isotropic_stiffness, is_spd, mandel_rotation, rotation_matrix
from network.forward import forward_stiffness
from network.topology import build_network
from .bundles import ANCHORS_FILE, load_anchor_bundle, load_anchors, save_anchor_bundle, write_manifest
from .orientation import (
    Descriptor,
    OrientationTensor,
    aligned_directions,
    descriptor_of,
    orientation_from_fibers,
    planar_random_directions,
    principal_frame,
    random_directions,
)
from .regression import (
    ANCHOR_DESCRIPTORS,
    ANCHOR_NAMES,
    Anchor,
    fit_anchor_regression,
    instantiate_network,
)
from .serializers import AnchorManifestSerializer

C_FIBER = isotropic_stiffness(72000.0, 0.20)
C_MATRIX = isotropic_stiffness(1616.0, 0.3545)

RVE_1 = OrientationTensor.from_components(0.5861, 0.3521, 0.0618, 0.05447, -0.0172, -0.0159)
RVE_2 = OrientationTensor.from_components(0.1353, 0.8036, 0.0611, 0.1504, -0.009521, -0.005788)


def make_anchors(n_layers=3, seed=40):
    return [
        Anchor(descriptor, build_network(n_layers, seed + k), name)
        for k, (descriptor, name) in enumerate(zip(ANCHOR_DESCRIPTORS, ANCHOR_NAMES))
    ]


def principal_stiffness(c_global, frame):
    m = mandel_rotation(frame)
    return m.T @ c_global @ m


def relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class OrientationTensorTest(SimpleTestCase):
    """Tests for orientation tensors and descriptors."""

    def test_unidirectional_fibers(self):
        """Test fibers along x give diag(1, 0, 0) and the unidirectional vertex."""
        a = orientation_from_fibers(aligned_directions(10))
        np.testing.assert_array_equal(a.a, np.diag([1.0, 0.0, 0.0]))
        descriptor, frame = descriptor_of(a, 0.2)
        self.assertEqual((descriptor.a11, descriptor.a22), (1.0, 0.0))
        np.testing.assert_array_equal(frame, np.eye(3))

    def test_random_and_planar_samples(self):
        """Test sphere and in-plane samples approach the random 3D and 2D states."""
        rng = np.random.default_rng(0)
        spatial, _ = descriptor_of(orientation_from_fibers(random_directions(20000, rng)), 0.1)
        planar, _ = descriptor_of(orientation_from_fibers(planar_random_directions(20000, rng)), 0.1)
        np.testing.assert_allclose([spatial.a11, spatial.a22], [1 / 3, 1 / 3], atol=0.02)
        np.testing.assert_allclose([planar.a11, planar.a22, planar.a33], [0.5, 0.5, 0.0], atol=0.02)

    def test_vertex_states(self):
        """Test exact vertex tensors map to the triangle vertices."""
        spatial, frame = descriptor_of(OrientationTensor(np.eye(3) / 3.0), 0.1)
        planar, _ = descriptor_of(OrientationTensor(np.diag([0.5, 0.5, 0.0])), 0.1)
        self.assertAlmostEqual(spatial.a11, 1 / 3, places=15)
        self.assertAlmostEqual(spatial.a22, 1 / 3, places=15)
        np.testing.assert_allclose(frame, np.eye(3), atol=1e-14)
        self.assertEqual((planar.a11, planar.a22), (0.5, 0.5))

    def test_measured_tensors_match_eigen_solver(self):
        """Test descriptors of two measured tensors against scipy's symmetric eigensolver."""
        for tensor, vf in ((RVE_1, 0.194), (RVE_2, 0.240)):
            expected = eigvalsh(tensor.a)[::-1]
            descriptor, frame = descriptor_of(tensor, vf)
            self.assertLessEqual(abs(descriptor.a11 - expected[0]), 1e-10)
            self.assertLessEqual(abs(descriptor.a22 - expected[1]), 1e-10)
            self.assertTrue(descriptor.in_triangle())
            np.testing.assert_allclose(frame.T @ tensor.a @ frame, np.diag(expected), atol=1e-12)
            self.assertAlmostEqual(np.linalg.det(frame), 1.0, places=12)

    def test_random_tensors_inside_triangle(self):
        """Test 1000 random orientation tensors land in the triangle."""
        rng = np.random.default_rng(1)
        for _ in range(1000):
            b = rng.normal(size=(3, 3))
            a = b @ b.T
            descriptor, _ = descriptor_of(OrientationTensor(a / np.trace(a)), 0.2)
            self.assertTrue(descriptor.in_triangle())

    def test_tied_eigenvalues_use_global_axes(self):
        """Test a degenerate eigenspace takes its axes from the projected global axes."""
        values, frame = principal_frame(np.diag([0.0, 1.0, 0.0]))
        np.testing.assert_array_equal(values, [1.0, 0.0, 0.0])
        np.testing.assert_allclose(frame, [[0, 1, 0], [1, 0, 0], [0, 0, -1]], atol=1e-15)

    def test_tied_plane_takes_projected_axes_in_order(self):
        """Test a tilted transversely isotropic tensor picks projected x, then z when y is dependent."""
        n = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
        values, frame = principal_frame(0.4 * np.eye(3) - 0.2 * np.outer(n, n))
        np.testing.assert_allclose(values, [0.4, 0.4, 0.2], atol=1e-14)
        np.testing.assert_allclose(frame[:, 0], [1.0 / np.sqrt(2.0), -1.0 / np.sqrt(2.0), 0.0], atol=1e-12)
        np.testing.assert_allclose(frame[:, 1], [0.0, 0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(frame[:, 2], -n, atol=1e-12)

    def test_rejections(self):
        """Test bad traces, volume fractions and directions are rejected."""
        with self.assertRaises(InvalidOrientationError):
            descriptor_of(OrientationTensor(np.diag([0.5, 0.3, 0.3])), 0.2)
        with self.assertRaises(InvalidOrientationError):
            descriptor_of(RVE_1, 1.2)
        with self.assertRaises(InvalidOrientationError):
            OrientationTensor(np.array([[1.0, 0.2, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
        with self.assertRaises(InvalidOrientationError):
            orientation_from_fibers([[1.0, 1.0, 0.0]])
        with self.assertRaises(InvalidOrientationError):
            orientation_from_fibers([])


class AnchorRegressionTest(SimpleTestCase):
    """Tests for the descriptor regression over four anchors."""

    def setUp(self):
        self.anchors = make_anchors()
        self.anchor_set = fit_anchor_regression(self.anchors)

    def test_interpolates_anchors(self):
        """Test the regression reproduces every anchor's parameters."""
        for anchor in self.anchors:
            predicted = self.anchor_set.predict(anchor.descriptor)
            np.testing.assert_allclose(predicted, anchor.network.parameter_vector(), atol=1e-12)
        self.assertEqual(self.anchor_set.coefficients.shape, (4 + 7 * 3, 4))

    def test_constant_parameters(self):
        """Test identical anchors give a constant model."""
        net = build_network(3, seed=1)
        anchors = [Anchor(d, net) for d in ANCHOR_DESCRIPTORS]
        model = fit_anchor_regression(anchors)
        np.testing.assert_allclose(model.predict(Descriptor(0.2, 0.6, 0.3)), net.parameter_vector(), atol=1e-12)

    def test_mean_descriptor_gives_mean_parameters(self):
        """Test the average descriptor maps to the average parameter vector."""
        mean = np.mean([d.as_array() for d in ANCHOR_DESCRIPTORS], axis=0)
        expected = np.mean([a.network.parameter_vector() for a in self.anchors], axis=0)
        np.testing.assert_allclose(self.anchor_set.predict(Descriptor(*mean)), expected, atol=1e-12)

    def test_degenerate_anchor_layout(self):
        """Test anchors sharing one volume fraction cannot be fitted."""
        descriptors = [Descriptor(0.08, 1 / 3, 1 / 3), Descriptor(0.08, 0.5, 0.5),
                       Descriptor(0.08, 1.0, 0.0), Descriptor(0.08, 0.6, 0.4)]
        anchors = [Anchor(d, a.network) for d, a in zip(descriptors, self.anchors)]
        with self.assertRaises(AnchorDegeneracyError):
            fit_anchor_regression(anchors)
        with self.assertRaises(AnchorDegeneracyError):
            fit_anchor_regression(self.anchors[:3])

    def test_mixed_depths(self):
        """Test anchors of different depth are rejected."""
        anchors = list(self.anchors)
        anchors[2] = Anchor(anchors[2].descriptor, build_network(4, seed=0))
        with self.assertRaises(TopologyError):
            fit_anchor_regression(anchors)

    def test_wide_angle_spread_flagged(self):
        """Test angles spreading over more than pi/2 across anchors are flagged."""
        anchors = list(self.anchors)
        net = anchors[0].network
        angles = np.array(net.angles)
        angles[0, 0] += 3.0
        anchors[0] = Anchor(anchors[0].descriptor, net.with_parameters(net.z, angles))
        with self.assertLogs('transfer.regression', level='WARNING'):
            anchor_set = fit_anchor_regression(anchors)
        self.assertEqual(anchor_set.wide_angles, (0,))


class InstantiationTest(SimpleTestCase):
    """Tests for per-point network instantiation."""

    def setUp(self):
        self.anchors = make_anchors()
        self.anchor_set = fit_anchor_regression(self.anchors)

    def test_anchor_descriptors_reproduce_anchor_stiffness(self):
        """Test instantiating at the anchor states reproduces the anchor networks."""
        tensors = [np.eye(3) / 3.0, np.diag([0.5, 0.5, 0.0]), np.diag([1.0, 0.0, 0.0]), np.diag([1.0, 0.0, 0.0])]
        for anchor, a in zip(self.anchors, tensors):
            net = instantiate_network(self.anchor_set, OrientationTensor(a), anchor.descriptor.vf)
            expected = forward_stiffness(anchor.network, C_FIBER, C_MATRIX)
            self.assertLessEqual(relative(forward_stiffness(net, C_FIBER, C_MATRIX), expected), 1e-10)
            self.assertFalse(net.provenance['extrapolated'])

    def test_fibers_turned_to_y(self):
        """Test fibers along y swap the 11 and 22 responses of the x-aligned anchor."""
        aligned = forward_stiffness(self.anchors[2].network, C_FIBER, C_MATRIX)
        net = instantiate_network(self.anchor_set, OrientationTensor(np.diag([0.0, 1.0, 0.0])), 0.08)
        turned = forward_stiffness(net, C_FIBER, C_MATRIX)
        perm = [1, 0, 2]
        np.testing.assert_allclose(turned[:3, :3], aligned[np.ix_(perm, perm)], rtol=1e-10)
        np.testing.assert_allclose(np.sort(np.diag(turned)[3:]), np.sort(np.diag(aligned)[3:]), rtol=1e-10)

    def test_frame_objectivity(self):
        """Test rotated tensors give the same stiffness in their own principal frame."""
        rng = np.random.default_rng(3)
        base = instantiate_network(self.anchor_set, RVE_1, 0.194)
        _, frame = descriptor_of(RVE_1, 0.194)
        reference = principal_stiffness(forward_stiffness(base, C_FIBER, C_MATRIX), frame)
        for _ in range(100):
            q = rotation_matrix(rng.uniform(-np.pi, np.pi, 3))
            rotated = RVE_1.rotated(q)
            net = instantiate_network(self.anchor_set, rotated, 0.194)
            _, rotated_frame = descriptor_of(rotated, 0.194)
            c = principal_stiffness(forward_stiffness(net, C_FIBER, C_MATRIX), rotated_frame)
            self.assertLessEqual(relative(c, reference), 1e-8)

    def test_measured_microstructures(self):
        """Test both measured microstructures instantiate to SPD stiffnesses."""
        for tensor, vf in ((RVE_1, 0.194), (RVE_2, 0.240)):
            net = instantiate_network(self.anchor_set, tensor, vf)
            self.assertTrue(is_spd(forward_stiffness(net, C_FIBER, C_MATRIX)))
            self.assertEqual(net.provenance['init'], 'transfer')

    def test_extrapolation_flagged(self):
        """Test a volume fraction outside the anchor range warns and is recorded."""
        with self.assertLogs('transfer.regression', level='WARNING'):
            net = instantiate_network(self.anchor_set, RVE_1, 0.5)
        self.assertTrue(net.provenance['extrapolated'])


class BundleTest(SimpleTestCase):
    """Tests for anchor manifests and bundles."""

    def test_bundle_round_trip(self):
        """Test a saved bundle reloads to the same regression."""
        anchor_set = fit_anchor_regression(make_anchors())
        with tempfile.TemporaryDirectory() as tmp:
            save_anchor_bundle(anchor_set, tmp)
            loaded = load_anchor_bundle(tmp)
        self.assertEqual(loaded.n_layers, 3)
        self.assertEqual([a.name for a in loaded.anchors], list(ANCHOR_NAMES))
        np.testing.assert_allclose(loaded.coefficients, anchor_set.coefficients, atol=1e-12)

    def test_anchor_directory(self):
        """Test anchors.json resolves default network file names."""
        anchor_set = fit_anchor_regression(make_anchors())
        with tempfile.TemporaryDirectory() as tmp:
            save_anchor_bundle(anchor_set, tmp)
            entries = [{'name': n, 'vf': d.vf, 'a11': d.a11, 'a22': d.a22}
                       for n, d in zip(ANCHOR_NAMES, ANCHOR_DESCRIPTORS)]
            write_manifest(f'{tmp}/{ANCHORS_FILE}', 'dmn-anchors', entries)
            anchors = load_anchors(tmp)
        self.assertEqual(anchors[3].descriptor, ANCHOR_DESCRIPTORS[3])

    def test_missing_bundle(self):
        """Test a directory without a bundle manifest is a configuration error."""
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                load_anchor_bundle(tmp)

    def test_manifest_validation(self):
        """Test descriptors outside the triangle and duplicate names are rejected."""
        entry = {'name': 'a', 'vf': 0.1, 'a11': 0.2, 'a22': 0.7}
        serializer = AnchorManifestSerializer(data={'format': 'dmn-anchors', 'version': 1, 'anchors': [entry]})
        self.assertFalse(serializer.is_valid())
        entry = {'name': 'a', 'vf': 0.1, 'a11': 1.0, 'a22': 0.0}
        serializer = AnchorManifestSerializer(
            data={'format': 'dmn-anchors', 'version': 1, 'anchors': [entry, entry]}
        )
        self.assertFalse(serializer.is_valid())
        self.assertIn('anchors', serializer.errors)
