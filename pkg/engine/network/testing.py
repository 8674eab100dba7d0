"""
Reference evaluators used by the test suites.

Both are deliberately straightforward: the interface problem is solved as a
dense 12-unknown linear system and the tree is walked node by node.
"""
from typing import Optional, Tuple

import numpy as np

from mechanics.mandel import rotate_stiffness
from .building_block import IN_PLANE, INTERFACE
from .topology import Network, node_row


def interface_oracle(
    c1: np.ndarray,
    c2: np.ndarray,
    vf2: float,
    eps_bar: np.ndarray,
    d1: Optional[np.ndarray] = None,
    d2: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Phase strains and block stress of a laminate with affine phases.

    Solves in-plane strain continuity, interface traction equilibrium and
    the strain mixture rule for (eps1, eps2); returns (eps1, eps2, sigma_bar).
    """
    d1 = np.zeros(6) if d1 is None else np.asarray(d1, dtype=float)
    d2 = np.zeros(6) if d2 is None else np.asarray(d2, dtype=float)
    system = np.zeros((12, 12))
    rhs = np.zeros(12)
    for row, i in enumerate(IN_PLANE):
        system[row, i] = 1.0
        system[row, 6 + i] = -1.0
    for row, j in enumerate(INTERFACE, start=3):
        system[row, :6] = c1[j]
        system[row, 6:] = -c2[j]
        rhs[row] = d2[j] - d1[j]
    system[6:, :6] = (1.0 - vf2) * np.eye(6)
    system[6:, 6:] = vf2 * np.eye(6)
    rhs[6:] = eps_bar
    x = np.linalg.solve(system, rhs)
    eps1, eps2 = x[:6], x[6:]
    sigma = (1.0 - vf2) * (c1 @ eps1 + d1) + vf2 * (c2 @ eps2 + d2)
    return eps1, eps2, sigma


def oracle_block(c1: np.ndarray, c2: np.ndarray, vf2: float) -> Tuple[np.ndarray, np.ndarray]:
    """(C_bar, A) assembled column by column from the interface oracle."""
    c_bar = np.empty((6, 6))
    a = np.empty((6, 6))
    for k in range(6):
        eps1, _, sigma = interface_oracle(c1, c2, vf2, np.eye(6)[k])
        c_bar[:, k] = sigma
        a[:, k] = eps1
    return c_bar, a


def reference_forward(net: Network, c_f: np.ndarray, c_m: np.ndarray) -> np.ndarray:
    """Top stiffness by recursive node-by-node evaluation, skipping zero-weight subtrees."""
    weights = net.weights
    bottom = net.n_layers - 1

    def node(layer: int, k: int) -> np.ndarray:
        if layer == bottom:
            c = c_m if k % 2 == 0 else c_f
        else:
            w_left, w_right = weights[layer + 1][2 * k], weights[layer + 1][2 * k + 1]
            if w_left <= 0:
                c = node(layer + 1, 2 * k + 1)
            elif w_right <= 0:
                c = node(layer + 1, 2 * k)
            else:
                c, _ = oracle_block(node(layer + 1, 2 * k), node(layer + 1, 2 * k + 1), w_right / (w_left + w_right))
        return rotate_stiffness(c, net.angles[node_row(layer, k)])

    return node(0, 0)


def rod_network(vf: float) -> Network:
    """
    Three-layer network whose fiber acts as a rod along x, with fiber fraction vf.

    A fiber/matrix laminate turned about x is stacked with pure matrix, so
    only the x direction sees the fiber in parallel.
    """
    z = [(1.0 - vf) / 2.0, vf, (1.0 - vf) / 2.0, 0.0]
    angles = np.zeros((7, 3))
    angles[node_row(1, 0)] = [0.0, np.pi / 2.0, 0.0]
    return Network(3, z, angles)
