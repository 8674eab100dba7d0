"""
Affine building block: phases respond as dsig = C deps + dsig_corr.

The block response dsig_bar = C_bar deps_bar + dsig_bar_corr follows from the
same interface solve as the linear block, with the correction jump on the
traction rows as an extra right-hand side.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from network.building_block import INTERFACE, InterfaceSolution, homogenized_stiffness, interface_solve


@dataclass
class AffineBlock:
    """
    Solved affine block.

    Phase-1 strain is A @ deps_bar + offset.
    """
    solution: InterfaceSolution
    offset: np.ndarray
    c_bar: np.ndarray
    d_bar: np.ndarray

    @property
    def f(self) -> np.ndarray:
        return self.solution.f


def affine_interface(c1, d1, c2, d2, vf2) -> AffineBlock:
    """Batched affine homogenization of blocks with leading dimensions (...)."""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    solution = interface_solve(c1, c2, vf2)
    f = solution.f[..., None]

    jump = f * (d2 - d1)[..., INTERFACE]
    offset = np.zeros(solution.f.shape + (6,))
    offset[..., INTERFACE] = np.linalg.solve(solution.K, jump[..., None])[..., 0]

    c_bar = homogenized_stiffness(solution, c2)
    d_bar = (1.0 - f) * d1 + f * d2 - (1.0 - f) * np.einsum('...ab,...b->...a', solution.D, offset)
    return AffineBlock(solution=solution, offset=offset, c_bar=c_bar, d_bar=d_bar)


def affine_block_homogenize(c1, d1, c2, d2, vf2) -> Tuple[np.ndarray, np.ndarray]:
    """(C_bar, dsig_bar) of a block with affine phase laws."""
    block = affine_interface(c1, d1, c2, d2, vf2)
    return block.c_bar, block.d_bar


def dehomogenize(
    parent_strain: np.ndarray,
    block: AffineBlock,
    dead_left: Optional[np.ndarray] = None,
    dead_right: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Phase strains of a block from its average strain.

    The surviving child of a block with one dead child takes the block
    strain unchanged; so does the dead one.
    """
    eps_bar = np.asarray(parent_strain, dtype=float)
    f = block.f[..., None]
    eps1 = np.einsum('...ab,...b->...a', block.solution.A, eps_bar) + block.offset
    safe_f = np.where(f > 0, f, 1.0)
    eps2 = (eps_bar - (1.0 - f) * eps1) / safe_f
    if dead_left is not None or dead_right is not None:
        passthrough = np.zeros(block.f.shape, dtype=bool)
        if dead_left is not None:
            passthrough |= dead_left
        if dead_right is not None:
            passthrough |= dead_right
        eps1 = np.where(passthrough[..., None], eps_bar, eps1)
        eps2 = np.where(passthrough[..., None], eps_bar, eps2)
    return eps1, eps2
