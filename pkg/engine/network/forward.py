"""
Linear forward pass: bottom-up homogenization to the top-node stiffness.

Every layer is evaluated at once over all samples. Only blocks with two live
children are solved; the index sets come from the network and are fixed for
its lifetime. Blocks with one zero-weight child pass the surviving child
through unchanged, blocks with two dead children never reach a live parent.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from config.exceptions import EmptyNetworkError
from .building_block import InterfaceSolution, homogenized_stiffness, interface_solve
from .topology import Network

logger = logging.getLogger(__name__)


@dataclass
class LayerRecord:
    """Intermediate values of one layer kept for backpropagation."""
    pre_rotation: np.ndarray
    output: np.ndarray
    solution: InterfaceSolution = None
    dead_left: np.ndarray = None
    dead_right: np.ndarray = None
    live_index: np.ndarray = None


def _stack_phases(net: Network, c_f: np.ndarray, c_m: np.ndarray) -> np.ndarray:
    batch = c_f.shape[0]
    phases = np.empty((batch, net.n_bottom, 6, 6))
    phases[:, 0::2] = c_m[:, None]
    phases[:, 1::2] = c_f[:, None]
    return phases


def _rotate(r: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.swapaxes(r, -1, -2)[None] @ c @ r[None]


def _as_batch(c: np.ndarray) -> Tuple[np.ndarray, bool]:
    c = np.asarray(c, dtype=float)
    if c.ndim == 2:
        return c[None], True
    return c, False


def forward_with_record(net: Network, c_f: np.ndarray, c_m: np.ndarray) -> Tuple[np.ndarray, List[LayerRecord]]:
    """
    Top-node stiffness for a batch of phase pairs.

    Returns the (B, 6, 6) stiffness stack and one LayerRecord per layer,
    indexed like the layers (0 = top).
    """
    if net.total_weight <= 0:
        raise EmptyNetworkError('all bottom activations are non-positive; the network has no active node')
    c_f, _ = _as_batch(c_f)
    c_m, _ = _as_batch(c_m)
    c_f, c_m = np.broadcast_arrays(c_f, c_m)

    records: List[LayerRecord] = [None] * net.n_layers
    bottom = net.n_layers - 1
    phases = _stack_phases(net, c_f, c_m)
    current = _rotate(net.rotations[bottom], phases)
    records[bottom] = LayerRecord(pre_rotation=phases, output=current)

    for layer in range(bottom - 1, -1, -1):
        layout = net.blocks[layer]
        dead_left, dead_right, live = layout.dead_left, layout.dead_right, layout.live_index
        c1 = current[:, 0::2]
        c2 = current[:, 1::2]
        c_bar = np.where(dead_left[None, :, None, None], c2, c1)
        solution = None
        if live.size:
            solution = interface_solve(c1[:, live], c2[:, live], layout.f[None, live])
            c_bar[:, live] = homogenized_stiffness(solution, c2[:, live])
        current = _rotate(net.rotations[layer], c_bar)
        records[layer] = LayerRecord(
            pre_rotation=c_bar,
            output=current,
            solution=solution,
            dead_left=dead_left,
            dead_right=dead_right,
            live_index=live,
        )
    return current[:, 0], records


def forward_stiffness(net: Network, c_f: np.ndarray, c_m: np.ndarray) -> np.ndarray:
    """Overall stiffness C_1^1 of the network for phase stiffnesses C_f and C_m."""
    _, single = _as_batch(c_f)
    _, single_m = _as_batch(c_m)
    top, _ = forward_with_record(net, c_f, c_m)
    if single and single_m:
        return top[0]
    return top
