"""
Nonlinear online prediction with one network per material point.

A step iterates Jacobi sweeps over the whole tree: evaluate the bottom
materials at the current strains, homogenize the affine responses upward,
de-homogenize the macroscopic increment downward and compare the new bottom
strains with the previous ones. Material states are committed only when the
sweep has converged.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from django.conf import settings

from config.exceptions import EmptyNetworkError, NonConvergenceError
from materials.laws import MaterialLaw, MaterialState
from network.building_block import InterfaceSolution
from network.topology import Network, PhaseAssignment
from .affine import AffineBlock, affine_interface, dehomogenize

logger = logging.getLogger(__name__)


@dataclass
class LayerCache:
    """Converged per-layer data: block stiffness, correction, strain and phase strains."""
    c_bar: np.ndarray
    d_bar: np.ndarray
    strain: np.ndarray
    concentration: np.ndarray
    child_strains: Tuple[np.ndarray, np.ndarray]


@dataclass
class NetworkState:
    """
    Online state of one material point.

    Bottom material states are split by phase: matrix nodes are the even
    0-based bottom indices, fiber nodes the odd ones.
    """
    network: Network
    fiber: MaterialLaw
    matrix: MaterialLaw
    fiber_state: MaterialState
    matrix_state: MaterialState
    stress: np.ndarray = field(default_factory=lambda: np.zeros(6))
    strain: np.ndarray = field(default_factory=lambda: np.zeros(6))
    cache: Optional[List[LayerCache]] = None
    steps: int = 0

    @classmethod
    def initial(cls, network: Network, fiber: MaterialLaw, matrix: MaterialLaw) -> 'NetworkState':
        if network.total_weight <= 0:
            raise EmptyNetworkError('cannot build an online state for a network without active nodes')
        half = network.n_bottom // 2
        return cls(
            network=network,
            fiber=fiber,
            matrix=matrix,
            fiber_state=MaterialState.zeros((half,)),
            matrix_state=MaterialState.zeros((half,)),
        )

    def __str__(self):
        return f'NetworkState({self.network}, steps={self.steps})'

    @property
    def density(self) -> float:
        """Mixture density weighted by the network's fiber fraction."""
        vf = self.network.fiber_fraction()
        return vf * self.fiber.density + (1.0 - vf) * self.matrix.density


@dataclass
class StepResult:
    dsig: np.ndarray
    state: NetworkState
    iterations: int
    residual: float


def _bottom_live(net: Network) -> Tuple[np.ndarray, np.ndarray]:
    live = net.weights[-1] > 0
    return live[1::2], live[0::2]


def _evaluate_bottom(state: NetworkState, strains: np.ndarray):
    """Material updates at live bottom nodes; quantities returned in node output frames."""
    net = state.network
    r = net.rotations[-1]
    local = np.einsum('nab,nb->na', r, strains)
    tangent = np.empty((net.n_bottom, 6, 6))
    correction = np.zeros((net.n_bottom, 6))
    trial = {}
    live_fiber, live_matrix = _bottom_live(net)
    for law, committed, live, slot, name in (
        (state.matrix, state.matrix_state, live_matrix, slice(0, None, 2), 'matrix'),
        (state.fiber, state.fiber_state, live_fiber, slice(1, None, 2), 'fiber'),
    ):
        phase_strain = local[slot]
        phase_tangent = np.array(np.broadcast_to(law.stiffness, phase_strain.shape[:-1] + (6, 6)))
        phase_correction = np.zeros_like(phase_strain)
        new_state = committed.copy()
        if np.any(live):
            sub = MaterialState(committed.stress[live], committed.eps_p[live], committed.plastic_strain[live])
            update = law.update(sub, phase_strain[live])
            phase_tangent[live] = update.tangent
            phase_correction[live] = update.correction
            new_state.stress[live] = update.state.stress
            new_state.eps_p[live] = update.state.eps_p
            new_state.plastic_strain[live] = update.state.plastic_strain
        tangent[slot] = phase_tangent
        correction[slot] = phase_correction
        trial[name] = new_state

    r_t = np.swapaxes(r, -1, -2)
    tangent = r_t @ tangent @ r
    correction = np.einsum('nba,nb->na', r, correction)
    return tangent, correction, trial


def _forward(net: Network, tangent: np.ndarray, correction: np.ndarray):
    """Affine homogenization up the tree; returns top (C, dsig) and per-layer blocks."""
    blocks: List[Tuple[AffineBlock, np.ndarray, np.ndarray]] = [None] * (net.n_layers - 1)
    c, d = tangent, correction
    for layer in range(net.n_layers - 2, -1, -1):
        layout = net.blocks[layer]
        c1, c2 = c[0::2], c[1::2]
        d1, d2 = d[0::2], d[1::2]
        block = affine_interface(c1, d1, c2, d2, layout.f)
        c_bar = np.where(layout.dead_left[:, None, None], c2, block.c_bar)
        c_bar = np.where(layout.dead_right[:, None, None], c1, c_bar)
        d_bar = np.where(layout.dead_left[:, None], d2, block.d_bar)
        d_bar = np.where(layout.dead_right[:, None], d1, d_bar)
        r = net.rotations[layer]
        c = np.swapaxes(r, -1, -2) @ c_bar @ r
        d = np.einsum('nba,nb->na', r, d_bar)
        blocks[layer] = (block, c_bar, d_bar)
    return c[0], d[0], blocks


def _backward(net: Network, blocks, deps_macro: np.ndarray):
    """De-homogenize the macroscopic increment to bottom output-frame strains."""
    strain_out = deps_macro[None, :]
    layers = []
    for layer in range(net.n_layers - 1):
        layout = net.blocks[layer]
        eps_bar = np.einsum('nab,nb->na', net.rotations[layer], strain_out)
        block = blocks[layer][0]
        eps1, eps2 = dehomogenize(eps_bar, block, layout.dead_left, layout.dead_right)
        strain_out = np.empty((2 * eps_bar.shape[0], 6))
        strain_out[0::2] = eps1
        strain_out[1::2] = eps2
        layers.append((eps_bar, eps1, eps2))
    return strain_out, layers


def _initial_guess(state: NetworkState, deps_macro: np.ndarray) -> np.ndarray:
    """Bottom strains from the last converged concentrations, or zeros on the first step."""
    if state.cache is None:
        return np.zeros((state.network.n_bottom, 6))
    blocks = []
    for layer, cache in enumerate(state.cache):
        solution = InterfaceSolution(A=cache.concentration, K=None, X=None, D=None, f=state.network.blocks[layer].f)
        offset = np.zeros((cache.concentration.shape[0], 6))
        blocks.append((AffineBlock(solution, offset, cache.c_bar, cache.d_bar), cache.c_bar, cache.d_bar))
    strains, _ = _backward(state.network, blocks, deps_macro)
    return strains


def network_step(
    state: NetworkState,
    deps_macro: np.ndarray,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> StepResult:
    """
    Advance one material point by a macroscopic strain increment.

    The input state is left untouched; the returned state holds the
    committed bottom states and sigma + dsig.
    """
    tol = tol if tol is not None else getattr(settings, 'DMN_ONLINE_TOL', 1e-8)
    max_iter = max_iter if max_iter is not None else getattr(settings, 'DMN_ONLINE_MAX_ITER', 50)
    relax_after = getattr(settings, 'DMN_ONLINE_RELAX_AFTER', 20)
    relax_factor = getattr(settings, 'DMN_ONLINE_RELAX_FACTOR', 0.5)
    if tol <= 0:
        raise ValueError(f'tolerance must be positive, got {tol}')

    net = state.network
    deps_macro = np.asarray(deps_macro, dtype=float).reshape(6)
    threshold = tol * max(1.0, float(np.linalg.norm(deps_macro)))
    live_bottom = net.weights[-1] > 0

    strains = _initial_guess(state, deps_macro)
    relaxation = 1.0
    stalled = 0
    previous = np.inf
    residual = np.inf

    for iteration in range(1, max_iter + 1):
        tangent, correction, trial = _evaluate_bottom(state, strains)
        c_top, d_top, blocks = _forward(net, tangent, correction)
        dsig = c_top @ deps_macro + d_top
        new_strains, layer_strains = _backward(net, blocks, deps_macro)

        residual = float(np.linalg.norm(new_strains[live_bottom] - strains[live_bottom], axis=-1).sum())
        if residual <= threshold:
            cache = [
                LayerCache(
                    c_bar=blocks[layer][1],
                    d_bar=blocks[layer][2],
                    strain=layer_strains[layer][0],
                    concentration=blocks[layer][0].solution.A,
                    child_strains=(layer_strains[layer][1], layer_strains[layer][2]),
                )
                for layer in range(net.n_layers - 1)
            ]
            committed = replace(
                state,
                fiber_state=trial['fiber'],
                matrix_state=trial['matrix'],
                stress=state.stress + dsig,
                strain=state.strain + deps_macro,
                cache=cache,
                steps=state.steps + 1,
            )
            return StepResult(dsig=dsig, state=committed, iterations=iteration, residual=residual)

        stalled = stalled + 1 if residual >= previous else 0
        if stalled >= relax_after and relaxation == 1.0:
            relaxation = relax_factor
            logger.warning(
                f'Residual stalled for {stalled} iterations at {residual:.3e}; relaxing with factor {relaxation}'
            )
        previous = residual
        strains = strains + relaxation * (new_strains - strains)

    raise NonConvergenceError(
        f'network step did not converge in {max_iter} iterations (residual {residual:.3e})',
        residual=residual,
    )


def homogenized_eps(state: NetworkState) -> float:
    """Weight-averaged equivalent plastic strain over the matrix bottom nodes."""
    w = state.network.weights[-1][PhaseAssignment.matrix_mask(state.network.n_bottom)]
    total = w.sum()
    if total <= 0:
        return 0.0
    return float(np.dot(w, state.matrix_state.eps_p) / total)
