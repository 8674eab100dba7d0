"""
Mandel notation tensor algebra.

Symmetric second-order tensors are stored as 6-vectors ordered
(11, 22, 33, sqrt2*12, sqrt2*23, sqrt2*31) and fourth-order stiffness
tensors with minor symmetries as 6x6 matrices in the same basis, so that
dot products of Mandel vectors equal double contractions of the tensors.

Rotations use intrinsic Z-X-Z Euler angles (alpha, beta, gamma). This
convention is part of the network file format and must never change.
"""
import logging
import warnings
from typing import NamedTuple, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.transform import Rotation

from config.exceptions import (
    IncompressibilityError,
    SymmetryViolationError,
    MaterialParameterError,
)

logger = logging.getLogger(__name__)

MandelVector6 = NDArray[np.float64]
MandelMatrix6 = NDArray[np.float64]
Rotation6 = NDArray[np.float64]

SQRT2 = np.sqrt(2.0)
EULER_CONVENTION = 'ZXZ-intrinsic'

# Tensor index pair behind every Mandel component.
MANDEL_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0))
_ROWS = np.array([p for p, _ in MANDEL_PAIRS])
_COLS = np.array([q for _, q in MANDEL_PAIRS])
MANDEL_SCALE = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])

# Spherical projector pieces: m = mandel(identity).
IDENTITY_MANDEL = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
VOLUMETRIC_PROJECTOR = np.outer(IDENTITY_MANDEL, IDENTITY_MANDEL) / 3.0
DEVIATORIC_PROJECTOR = np.eye(6) - VOLUMETRIC_PROJECTOR


class EulerAngles(NamedTuple):
    """Intrinsic Z-X-Z Euler angles in radians."""
    alpha: float
    beta: float
    gamma: float


def tensor_to_mandel(t: ArrayLike, rtol: float = 1e-12) -> MandelVector6:
    """Convert symmetric 3x3 tensor(s) of shape (..., 3, 3) to Mandel vectors."""
    t = np.asarray(t, dtype=float)
    if t.shape[-2:] != (3, 3):
        raise SymmetryViolationError(f'expected (..., 3, 3) tensor, got shape {t.shape}')
    asym = np.linalg.norm(t - np.swapaxes(t, -1, -2), axis=(-2, -1))
    size = np.linalg.norm(t, axis=(-2, -1))
    if np.any(asym > rtol * size):
        raise SymmetryViolationError(
            f'tensor is not symmetric: |t - t^T| = {np.max(asym):.3e}'
        )
    return t[..., _ROWS, _COLS] * MANDEL_SCALE


def mandel_to_tensor(v: ArrayLike) -> NDArray[np.float64]:
    """Inverse of tensor_to_mandel for arrays of shape (..., 6)."""
    v = np.asarray(v, dtype=float)
    comp = v / MANDEL_SCALE
    t = np.empty(v.shape[:-1] + (3, 3))
    t[..., _ROWS, _COLS] = comp
    t[..., _COLS, _ROWS] = comp
    return t


def stiffness_to_tensor4(c: ArrayLike) -> NDArray[np.float64]:
    """Expand a 6x6 Mandel stiffness into its 3x3x3x3 component form."""
    c = np.asarray(c, dtype=float)
    comp = c / np.outer(MANDEL_SCALE, MANDEL_SCALE)
    t4 = np.empty((3, 3, 3, 3))
    for a, (i, j) in enumerate(MANDEL_PAIRS):
        for b, (k, l) in enumerate(MANDEL_PAIRS):
            value = comp[a, b]
            t4[i, j, k, l] = t4[j, i, k, l] = t4[i, j, l, k] = t4[j, i, l, k] = value
    return t4


def tensor4_to_stiffness(t4: ArrayLike) -> MandelMatrix6:
    t4 = np.asarray(t4, dtype=float)
    c = t4[_ROWS[:, None], _COLS[:, None], _ROWS[None, :], _COLS[None, :]]
    return c * np.outer(MANDEL_SCALE, MANDEL_SCALE)


# Unit Mandel basis expressed as 3x3 tensors.
_BASIS = mandel_to_tensor(np.eye(6))


def _axis_rotations(angles: NDArray[np.float64]):
    """Elementary Rz(alpha), Rx(beta), Rz(gamma) and their derivatives."""
    alpha, beta, gamma = angles[..., 0], angles[..., 1], angles[..., 2]
    shape = angles.shape[:-1]

    def rot_z(t):
        c, s = np.cos(t), np.sin(t)
        m = np.zeros(shape + (3, 3))
        dm = np.zeros(shape + (3, 3))
        m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1], m[..., 2, 2] = c, -s, s, c, 1.0
        dm[..., 0, 0], dm[..., 0, 1], dm[..., 1, 0], dm[..., 1, 1] = -s, -c, c, -s
        return m, dm

    def rot_x(t):
        c, s = np.cos(t), np.sin(t)
        m = np.zeros(shape + (3, 3))
        dm = np.zeros(shape + (3, 3))
        m[..., 0, 0], m[..., 1, 1], m[..., 1, 2], m[..., 2, 1], m[..., 2, 2] = 1.0, c, -s, s, c
        dm[..., 1, 1], dm[..., 1, 2], dm[..., 2, 1], dm[..., 2, 2] = -s, -c, c, -s
        return m, dm

    return rot_z(alpha), rot_x(beta), rot_z(gamma)


def rotation_matrix(angles: ArrayLike) -> NDArray[np.float64]:
    """3x3 rotation Q = Rz(alpha) Rx(beta) Rz(gamma) for angles of shape (..., 3)."""
    angles = np.asarray(angles, dtype=float)
    (za, _), (xb, _), (zg, _) = _axis_rotations(angles)
    return za @ xb @ zg


def mandel_rotation(q: ArrayLike) -> Rotation6:
    """Mandel-basis image of 3x3 rotation(s) q: mandel(q t q^T) = R mandel(t)."""
    q = np.asarray(q, dtype=float)
    left = q[..., _ROWS, :]
    right = q[..., _COLS, :]
    r = np.einsum('...ai,bij,...aj->...ab', left, _BASIS, right)
    return r * MANDEL_SCALE[:, None]


def rotation6(angles: ArrayLike) -> Rotation6:
    """6x6 Mandel rotation operator(s) for Euler angles of shape (..., 3)."""
    return mandel_rotation(rotation_matrix(angles))


def rotation6_with_derivatives(angles: ArrayLike) -> Tuple[Rotation6, NDArray[np.float64]]:
    """
    Mandel rotations and their derivatives with respect to each Euler angle.

    Returns (R, dR) with R of shape (..., 6, 6) and dR of shape (..., 3, 6, 6).
    """
    angles = np.asarray(angles, dtype=float)
    (za, dza), (xb, dxb), (zg, dzg) = _axis_rotations(angles)
    q = za @ xb @ zg
    dq = np.stack([dza @ xb @ zg, za @ dxb @ zg, za @ xb @ dzg], axis=-3)

    left = q[..., _ROWS, :]
    right = q[..., _COLS, :]
    r = np.einsum('...ai,bij,...aj->...ab', left, _BASIS, right) * MANDEL_SCALE[:, None]

    dleft = dq[..., _ROWS, :]
    dright = dq[..., _COLS, :]
    dr = (
        np.einsum('...kai,bij,...aj->...kab', dleft, _BASIS, right)
        + np.einsum('...ai,bij,...kaj->...kab', left, _BASIS, dright)
    ) * MANDEL_SCALE[:, None]
    return r, dr


def angles_from_matrix(q: ArrayLike) -> EulerAngles:
    """Euler angles of a proper 3x3 rotation matrix."""
    with warnings.catch_warnings():
        # Gimbal lock only makes the split between alpha and gamma arbitrary.
        warnings.simplefilter('ignore', UserWarning)
        alpha, beta, gamma = Rotation.from_matrix(np.asarray(q, dtype=float)).as_euler('ZXZ')
    return EulerAngles(float(alpha), float(beta), float(gamma))


def compose_angles(first: ArrayLike, second: ArrayLike) -> EulerAngles:
    """Angles of Q(first) @ Q(second), so rotation6(first) @ rotation6(second) == rotation6(result)."""
    return angles_from_matrix(rotation_matrix(first) @ rotation_matrix(second))


def inverse_angles(angles: ArrayLike) -> EulerAngles:
    alpha, beta, gamma = np.asarray(angles, dtype=float)
    return EulerAngles(-float(gamma), -float(beta), -float(alpha))


def rotate_stiffness(c: ArrayLike, angles: ArrayLike) -> MandelMatrix6:
    """C' = R^T C R with R = rotation6(angles)."""
    r = rotation6(angles)
    return np.swapaxes(r, -1, -2) @ np.asarray(c, dtype=float) @ r


def rotate_vector(v: ArrayLike, angles: ArrayLike) -> MandelVector6:
    """v' = R v with R = rotation6(angles)."""
    return rotation6(angles) @ np.asarray(v, dtype=float)


def lame_constants(E: float, nu: float) -> Tuple[float, float]:
    """Return (lambda, mu) for Young's modulus E and Poisson ratio nu."""
    if E <= 0:
        raise MaterialParameterError(f"Young's modulus must be positive, got {E}")
    if nu >= 0.5:
        raise IncompressibilityError(f'Poisson ratio {nu} is incompressible or unstable')
    if nu <= -1.0:
        raise MaterialParameterError(f'Poisson ratio must exceed -1, got {nu}')
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def isotropic_stiffness(E: float, nu: float) -> MandelMatrix6:
    """Isotropic elastic stiffness 3*kappa*P_vol + 2*mu*P_dev."""
    lam, mu = lame_constants(E, nu)
    kappa = lam + 2.0 * mu / 3.0
    return 3.0 * kappa * VOLUMETRIC_PROJECTOR + 2.0 * mu * DEVIATORIC_PROJECTOR


def orthotropic_stiffness(moduli: ArrayLike, shear_moduli: ArrayLike, couplings: ArrayLike) -> MandelMatrix6:
    """
    Axis-aligned orthotropic stiffness.

    Args:
        moduli: axial moduli (E1, E2, E3)
        shear_moduli: (G12, G23, G31)
        couplings: normalized compliance couplings (r12, r23, r31); the normal
            compliance block is D^-1/2 (I - P) D^-1/2 with P built from them.
    """
    e = np.asarray(moduli, dtype=float)
    g = np.asarray(shear_moduli, dtype=float)
    r12, r23, r31 = np.asarray(couplings, dtype=float)
    coupling = np.array([
        [1.0, -r12, -r31],
        [-r12, 1.0, -r23],
        [-r31, -r23, 1.0],
    ])
    scale = 1.0 / np.sqrt(e)
    compliance = np.zeros((6, 6))
    compliance[:3, :3] = coupling * np.outer(scale, scale)
    compliance[3:, 3:] = np.diag(1.0 / (2.0 * g))
    return symmetrize(np.linalg.inv(compliance))


def symmetrize(m: ArrayLike) -> NDArray[np.float64]:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def is_symmetric(m: ArrayLike, rtol: float = 1e-9) -> bool:
    m = np.asarray(m, dtype=float)
    asym = np.abs(m - np.swapaxes(m, -1, -2)).max(axis=(-2, -1))
    size = np.linalg.norm(m, axis=(-2, -1))
    return bool(np.all(asym <= rtol * size))


def is_spd(m: ArrayLike, rtol: float = 1e-9) -> bool:
    """Symmetric positive definite check by attempted Cholesky factorization."""
    m = np.asarray(m, dtype=float)
    if not is_symmetric(m, rtol):
        return False
    diag = np.abs(np.diagonal(m, axis1=-2, axis2=-1))
    shift = rtol * diag.max(axis=-1)[..., None, None] * np.eye(m.shape[-1])
    try:
        np.linalg.cholesky(symmetrize(m) - shift)
    except np.linalg.LinAlgError:
        return False
    return True


def mandel_from_engineering_strain(components: ArrayLike) -> MandelVector6:
    """(e11, e22, e33, g12, g23, g31) with engineering shears to a Mandel vector."""
    components = np.asarray(components, dtype=float)
    scale = np.array([1.0, 1.0, 1.0, 1.0 / SQRT2, 1.0 / SQRT2, 1.0 / SQRT2])
    return components * scale


def tensor_components(v: ArrayLike) -> NDArray[np.float64]:
    """Mandel vector to plain tensor components (t11, t22, t33, t12, t23, t31)."""
    return np.asarray(v, dtype=float) / MANDEL_SCALE
