"""
Cost function and its reverse-mode gradients.

The cost is the mean relative squared Frobenius error of the predicted
composite stiffness plus a penalty pulling sum(ReLU(z)) to 2**(N-2).
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from network.building_block import IN_PLANE, INTERFACE, InterfaceSolution
from network.forward import LayerRecord, forward_with_record
from network.topology import Network
from .datasets import Batch

logger = logging.getLogger(__name__)

_JJ = (INTERFACE[:, None], INTERFACE[None, :])
_JI = (INTERFACE[:, None], IN_PLANE[None, :])


@dataclass
class Gradients:
    z: np.ndarray
    angles: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.z, self.angles.reshape(-1)])

    def as_tuple(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(dJ/dz, dJ/dalpha, dJ/dbeta, dJ/dgamma)."""
        return self.z, self.angles[:, 0], self.angles[:, 1], self.angles[:, 2]


def penalty(net: Network, lam: float) -> float:
    return lam * (float(np.maximum(net.z, 0.0).sum()) - net.regularization_target()) ** 2


def relative_errors(prediction: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample squared norms of the residual and of the target."""
    residual = np.linalg.norm(prediction - target, axis=(-2, -1)) ** 2
    scale = np.linalg.norm(target, axis=(-2, -1)) ** 2
    return residual, scale


def data_cost(prediction: np.ndarray, target: np.ndarray) -> float:
    residual, scale = relative_errors(prediction, target)
    return float(0.5 * np.mean(residual / scale))


def cost(net: Network, batch: Batch, lam: float) -> float:
    if len(batch) == 0:
        raise ValueError('cost needs a non-empty batch')
    prediction, _ = forward_with_record(net, batch.fiber, batch.matrix)
    return data_cost(prediction, batch.composite) + penalty(net, lam)


def _solved_block_backward(grad: np.ndarray, sol: InterfaceSolution):
    """Gradients of solved blocks with respect to both children and the phase-2 fraction."""
    fb = sol.f[..., None, None]
    a, d, k, x = sol.A, sol.D, sol.K, sol.X
    swap = lambda m: np.swapaxes(m, -1, -2)

    g_f = np.sum(grad * (d @ a), axis=(-2, -1))
    g_d = -(1.0 - fb) * (grad @ swap(a))
    g_c2 = grad + g_d
    g_c1 = -g_d

    g_a = -(1.0 - fb) * (swap(d) @ grad)
    g_x = g_a[..., INTERFACE, :]
    g_t = np.linalg.solve(swap(k), g_x)
    g_k = -g_t @ swap(x)

    g_c1[(Ellipsis,) + _JJ] += fb * g_k
    g_c2[(Ellipsis,) + _JJ] += (1.0 - fb) * g_k
    g_f -= np.sum(g_k * d[(Ellipsis,) + _JJ], axis=(-2, -1))

    g_t_in_plane = g_t[..., IN_PLANE]
    g_c2[(Ellipsis,) + _JI] += fb * g_t_in_plane
    g_c1[(Ellipsis,) + _JI] -= fb * g_t_in_plane
    g_f += np.sum(g_t_in_plane * d[(Ellipsis,) + _JI], axis=(-2, -1))

    g_c2[(Ellipsis,) + _JJ] += g_t[..., INTERFACE]
    return g_c1, g_c2, g_f


def _block_backward(grad: np.ndarray, record: LayerRecord):
    """Gradients of C_bar per child and per phase-2 fraction; pass-through blocks hand grad to the live child."""
    only_left = record.dead_right & ~record.dead_left
    only_right = record.dead_left & ~record.dead_right
    g_c1 = np.where(only_left[None, :, None, None], grad, 0.0)
    g_c2 = np.where(only_right[None, :, None, None], grad, 0.0)
    g_f = np.zeros(grad.shape[1])
    live = record.live_index
    if live.size:
        s_c1, s_c2, s_f = _solved_block_backward(grad[:, live], record.solution)
        g_c1[:, live] = s_c1
        g_c2[:, live] = s_c2
        g_f[live] = s_f.sum(axis=0)
    return g_c1, g_c2, g_f


def backpropagate(net: Network, records: List[LayerRecord], grad_top: np.ndarray) -> Gradients:
    """Reverse sweep from dJ/dC_1^1 (shape (B, 6, 6)) to dJ/dz and dJ/dangles."""
    grad = grad_top[:, None]
    grad_w = np.zeros(1)
    grad_angles = np.zeros_like(net.angles)

    for layer in range(net.n_layers):
        record = records[layer]
        r = net.rotations[layer][None]
        r_t = np.swapaxes(r, -1, -2)
        pre = record.pre_rotation

        # output = R^T P R
        grad_r = (pre @ r @ np.swapaxes(grad, -1, -2) + np.swapaxes(pre, -1, -2) @ r @ grad).sum(axis=0)
        start = 2 ** layer - 1
        grad_angles[start:start + 2 ** layer] = np.einsum(
            'nab,nkab->nk', grad_r, net.rotation_derivatives[layer]
        )
        grad_pre = r @ grad @ r_t

        if layer == net.n_layers - 1:
            break

        g_c1, g_c2, g_f = _block_backward(grad_pre, record)
        children = net.weights[layer + 1]
        w1, w2 = children[0::2], children[1::2]
        total = w1 + w2
        safe = np.where(total > 0, total, 1.0) ** 2
        g_w1 = grad_w - g_f * w2 / safe
        g_w2 = grad_w + g_f * w1 / safe

        n_children = 2 ** (layer + 1)
        grad = np.empty((grad_pre.shape[0], n_children, 6, 6))
        grad[:, 0::2] = g_c1
        grad[:, 1::2] = g_c2
        grad_w = np.empty(n_children)
        grad_w[0::2] = g_w1
        grad_w[1::2] = g_w2

    grad_z = grad_w * (net.z > 0)
    return Gradients(z=grad_z, angles=grad_angles)


def cost_and_gradients(net: Network, batch: Batch, lam: float) -> Tuple[float, Gradients]:
    if len(batch) == 0:
        raise ValueError('gradients need a non-empty batch')
    prediction, records = forward_with_record(net, batch.fiber, batch.matrix)
    residual, scale = relative_errors(prediction, batch.composite)
    n = len(batch)
    grad_top = (prediction - batch.composite) / (n * scale[:, None, None])

    grads = backpropagate(net, records, grad_top)
    active = net.z > 0
    excess = float(np.maximum(net.z, 0.0).sum()) - net.regularization_target()
    grads.z = grads.z + 2.0 * lam * excess * active
    j = float(0.5 * np.mean(residual / scale)) + lam * excess ** 2
    return j, grads


def gradients(net: Network, batch: Batch, lam: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(dJ/dz, dJ/dalpha, dJ/dbeta, dJ/dgamma) for the given batch."""
    _, grads = cost_and_gradients(net, batch, lam)
    return grads.as_tuple()
