"""
Two-phase laminate building block.

Phase 1 and phase 2 share an interface with normal along axis 3. The in-plane
strain components (11, 22, 12) are continuous across it, the interface
tractions (33, 23, 31) are in equilibrium, and the phase strains average to
the block strain. All functions accept stacks of matrices (..., 6, 6).
"""
from dataclasses import dataclass

import numpy as np

from config.exceptions import DegenerateInterfaceError

# Mandel rows continuous across the interface and rows carrying the traction.
IN_PLANE = np.array([0, 1, 3])
INTERFACE = np.array([2, 4, 5])

INTERFACE_COND_LIMIT = 1e13


@dataclass
class InterfaceSolution:
    """
    Strain concentration of one block (or a stack of blocks).

    A maps the block strain to the phase-1 strain. K is the 3x3 interface
    stiffness f*C1 + (1 - f)*C2 restricted to the traction rows, and
    X = K^-1 T holds the traction rows of A.
    """
    A: np.ndarray
    K: np.ndarray
    X: np.ndarray
    D: np.ndarray
    f: np.ndarray


def _rows_cols(m: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return m[..., rows, :][..., cols]


def interface_solve(c1: np.ndarray, c2: np.ndarray, vf2) -> InterfaceSolution:
    """Batched strain concentration without conditioning checks."""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    f = np.asarray(vf2, dtype=float)
    fb = f[..., None, None]
    d = c2 - c1

    # Phase-1 traction rows weigh vf2 and phase-2 rows 1 - vf2; the 12-unknown
    # interface system confirms this placement.
    k = fb * _rows_cols(c1, INTERFACE, INTERFACE) + (1.0 - fb) * _rows_cols(c2, INTERFACE, INTERFACE)
    shape = np.broadcast_shapes(k.shape[:-2], c1.shape[:-2], c2.shape[:-2])
    t = np.empty(shape + (3, 6))
    t[..., IN_PLANE] = fb * _rows_cols(d, INTERFACE, IN_PLANE)
    t[..., INTERFACE] = _rows_cols(c2, INTERFACE, INTERFACE)
    k = np.broadcast_to(k, shape + (3, 3))

    try:
        x = np.linalg.solve(k, t)
    except np.linalg.LinAlgError as e:
        raise DegenerateInterfaceError(f'interface block is singular: {e}') from e
    if not np.all(np.isfinite(x)):
        raise DegenerateInterfaceError('interface solve produced non-finite strain concentration')

    a = np.zeros(shape + (6, 6))
    a[..., IN_PLANE, IN_PLANE] = 1.0
    a[..., INTERFACE, :] = x
    return InterfaceSolution(A=a, K=k, X=x, D=np.broadcast_to(d, shape + (6, 6)), f=np.broadcast_to(f, shape))


def homogenized_stiffness(solution: InterfaceSolution, c2: np.ndarray) -> np.ndarray:
    """C_bar = C2 - (1 - vf2) (C2 - C1) A."""
    fb = solution.f[..., None, None]
    return c2 - (1.0 - fb) * (solution.D @ solution.A)


def _check_fraction(vf2) -> None:
    vf2 = np.asarray(vf2, dtype=float)
    if np.any(vf2 < 0.0) or np.any(vf2 > 1.0):
        raise ValueError(f'volume fraction must lie in [0, 1], got {vf2}')


def strain_concentration(c_p1: np.ndarray, c_p2: np.ndarray, vf2: float) -> np.ndarray:
    """
    6x6 strain concentration matrix A with eps_p1 = A eps_bar.

    Rows 11, 22 and 12 are unit rows; rows 33, 23 and 31 come from the
    3x3 interface solve.
    """
    _check_fraction(vf2)
    solution = interface_solve(c_p1, c_p2, vf2)
    if np.any(np.linalg.cond(solution.K) > INTERFACE_COND_LIMIT):
        raise DegenerateInterfaceError('interface block is numerically singular')
    return solution.A


def block_homogenize(c_p1: np.ndarray, c_p2: np.ndarray, vf2: float) -> np.ndarray:
    """Homogenized stiffness of one laminate block."""
    _check_fraction(vf2)
    c2 = np.asarray(c_p2, dtype=float)
    solution = interface_solve(c_p1, c2, vf2)
    if np.any(np.linalg.cond(solution.K) > INTERFACE_COND_LIMIT):
        raise DegenerateInterfaceError('interface block is numerically singular')
    return homogenized_stiffness(solution, c2)


def phase2_concentration(solution: InterfaceSolution) -> np.ndarray:
    """A_p2 with eps_p2 = A_p2 eps_bar, from the mixture rule."""
    f = solution.f[..., None, None]
    return (np.eye(6) - (1.0 - f) * solution.A) / f


def voigt_reuss_bounds(c_p1: np.ndarray, c_p2: np.ndarray, vf2: float):
    """Uniform-strain (Voigt) and uniform-stress (Reuss) estimates."""
    c1 = np.asarray(c_p1, dtype=float)
    c2 = np.asarray(c_p2, dtype=float)
    voigt = (1.0 - vf2) * c1 + vf2 * c2
    reuss = np.linalg.inv((1.0 - vf2) * np.linalg.inv(c1) + vf2 * np.linalg.inv(c2))
    return voigt, reuss
