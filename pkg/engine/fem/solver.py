"""
Explicit dynamics with one network state per quadrature point.

Each step follows the central-difference scheme: accelerations from the
last internal force, half-step velocities, displacement increment, then a
network_step at every quadrature point with the strain increment B du and
assembly of the new internal force.
"""
import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from django.conf import settings

from config.exceptions import BlowUpError, CFLViolationError, ConfigurationError, NonConvergenceError
from materials.laws import MaterialLaw
from mechanics.mandel import tensor_components
from network.forward import forward_stiffness
from network.topology import Network
from online.state import NetworkState, homogenized_eps, network_step
from transfer.regression import AnchorSet, instantiate_network

from .mesh import GAUSS_WEIGHTS, Mesh, element_kinematics
from .microstructure import MicrostructureField

logger = logging.getLogger(__name__)

COMPONENTS = {'x': 0, 'y': 1, 'z': 2}
FIELD_COLUMNS = ['elem', 'qp', 's11', 's22', 's33', 's12', 's23', 's31', 'eps_hom']


@dataclass(frozen=True, eq=False)
class QuadPointBinding:
    """Static data of one quadrature point."""
    element: int
    point: int
    weight: float
    det_j: float
    b: np.ndarray
    shape: np.ndarray
    network: Network
    density: float

    @property
    def volume(self) -> float:
        return self.weight * self.det_j


@dataclass(frozen=True)
class BoundaryCondition:
    """
    Prescribed motion of one component on a node set.

    kind 'velocity' holds v = value; kind 'displacement' ramps u linearly
    from 0 to value over ramp_time (t_end when not given) and then holds it.
    """
    node_set: str
    component: str
    kind: str = 'displacement'
    value: float = 0.0
    ramp_time: Optional[float] = None

    def velocity(self, t: float, t_end: float) -> float:
        if self.kind == 'velocity':
            return self.value
        ramp = self.ramp_time or t_end
        return self.value / ramp if t < ramp else 0.0

    def displacement(self, t: float, t_end: float) -> Optional[float]:
        if self.kind == 'velocity':
            return None
        ramp = self.ramp_time or t_end
        return self.value * min(1.0, t / ramp)


@dataclass(frozen=True)
class NodalLoad:
    node_set: str
    component: str
    value: float


@dataclass(frozen=True)
class InitialVelocity:
    node_set: str
    vector: Tuple[float, float, float]


@dataclass
class SimConfig:
    dt: float
    t_end: float
    boundary_conditions: List[BoundaryCondition] = field(default_factory=list)
    loads: List[NodalLoad] = field(default_factory=list)
    initial_velocity: List[InitialVelocity] = field(default_factory=list)
    output_every: int = 1
    snapshot_every: int = 0
    allow_dt_override: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f'dt must be positive, got {self.dt}')
        if not self.t_end >= 0:
            raise ConfigurationError(f't_end must be non-negative, got {self.t_end}')
        if self.output_every < 1:
            raise ConfigurationError('output_every must be at least 1')
        for bc in self.boundary_conditions:
            if bc.component not in COMPONENTS:
                raise ConfigurationError(f"unknown component '{bc.component}'")
            if bc.kind not in ('velocity', 'displacement'):
                raise ConfigurationError(f"unknown boundary condition kind '{bc.kind}'")

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.t_end / self.dt - 1e-9))


@dataclass
class SimulationState:
    step: int
    time: float
    u: np.ndarray
    v: np.ndarray
    f_int: np.ndarray
    states: List[NetworkState]
    internal_work: float = 0.0
    external_work: float = 0.0

    def snapshot(self) -> 'SimulationState':
        return copy.deepcopy(self)

    def kinetic_energy(self, mass: np.ndarray) -> float:
        return 0.5 * float(np.dot(mass, self.v ** 2))


@dataclass
class SimulationResult:
    history: pd.DataFrame
    snapshots: List[Tuple[int, float, np.ndarray, pd.DataFrame]]
    state: SimulationState


def instantiate_element_networks(field: MicrostructureField, anchors: AnchorSet) -> List[Network]:
    """One network per element; elements with equal microstructure share an instance."""
    cache: Dict[Tuple, Network] = {}
    networks = []
    for e, key in enumerate(field.keys()):
        if key not in cache:
            a, vf = field[e]
            cache[key] = instantiate_network(anchors, a, vf)
        networks.append(cache[key])
    logger.info(f'Instantiated {len(cache)} distinct networks for {len(field)} elements')
    return networks


def bind_quadrature_points(
    mesh: Mesh,
    networks: Sequence[Network],
    fiber: MaterialLaw,
    matrix: MaterialLaw,
    vf: Optional[Sequence[float]] = None,
) -> List[QuadPointBinding]:
    """
    Bindings in element-major order, 8 Gauss points per element.

    The density mixes the phase densities by the element vf, or by the
    network's fiber fraction when no vf is given.
    """
    if len(networks) != mesh.n_elements:
        raise ConfigurationError(f'{len(networks)} networks for {mesh.n_elements} elements')
    bindings = []
    for e in range(mesh.n_elements):
        b, det_j, shapes = element_kinematics(mesh.element_coords(e))
        share = networks[e].fiber_fraction() if vf is None else float(vf[e])
        density = share * fiber.density + (1.0 - share) * matrix.density
        for q in range(8):
            bindings.append(QuadPointBinding(e, q, float(GAUSS_WEIGHTS[q]), float(det_j[q]), b[q], shapes[q], networks[e], density))
    return bindings


def initial_states(bindings: Sequence[QuadPointBinding], fiber: MaterialLaw, matrix: MaterialLaw) -> List[NetworkState]:
    return [NetworkState.initial(bp.network, fiber, matrix) for bp in bindings]


def lumped_mass(mesh: Mesh, bindings: Sequence[QuadPointBinding]) -> np.ndarray:
    """Row-sum lumped nodal mass, repeated for the 3 DOFs of each node."""
    mass = np.zeros(mesh.n_nodes)
    for bp in bindings:
        np.add.at(mass, mesh.connectivity[bp.element], bp.density * bp.shape * bp.volume)
    return np.repeat(mass, 3)


def critical_time_step(mesh: Mesh, bindings: Sequence[QuadPointBinding], fiber: MaterialLaw, matrix: MaterialLaw) -> float:
    """Smallest element transit time min_edge / sqrt(max eig(C_hom) / rho)."""
    moduli: Dict[int, float] = {}
    dt = np.inf
    for bp in bindings[::8]:
        key = id(bp.network)
        if key not in moduli:
            c = forward_stiffness(bp.network, fiber.stiffness, matrix.stiffness)
            moduli[key] = float(np.linalg.eigvalsh(c)[-1])
        if bp.density <= 0:
            raise ConfigurationError(f'element {mesh.element_ids[bp.element]} has no mass')
        speed = np.sqrt(moduli[key] / bp.density)
        dt = min(dt, mesh.min_edge_length(bp.element) / speed)
    return float(dt)


def _element_groups(bindings: Sequence[QuadPointBinding]) -> List[List[int]]:
    groups: Dict[int, List[int]] = {}
    for k, bp in enumerate(bindings):
        groups.setdefault(bp.element, []).append(k)
    return [groups[e] for e in sorted(groups)]


def assemble_internal_force(
    mesh: Mesh,
    bindings: Sequence[QuadPointBinding],
    states: Sequence[NetworkState],
    du: np.ndarray,
    threads: int = 1,
) -> Tuple[np.ndarray, List[NetworkState]]:
    """
    Advance every quadrature point by sym(B du) and assemble F_int = sum B^T sigma w detJ.

    Element forces are reduced in element order, so the result does not
    depend on the thread schedule.
    """
    du = np.asarray(du, dtype=float)

    def element_force(indices: List[int]):
        e = bindings[indices[0]].element
        u_e = du[mesh.element_dofs(e)]
        f_e = np.zeros(24)
        updated = []
        for k in indices:
            bp = bindings[k]
            try:
                result = network_step(states[k], bp.b @ u_e)
            except NonConvergenceError as err:
                raise NonConvergenceError(
                    'network step did not converge',
                    residual=err.residual,
                    location=f'element {mesh.element_ids[e]} point {bp.point}',
                ) from err
            f_e += bp.b.T @ result.state.stress * bp.volume
            updated.append(result.state)
        return e, f_e, updated

    groups = _element_groups(bindings)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(element_force, groups))
    else:
        results = [element_force(g) for g in groups]

    force = np.zeros(3 * mesh.n_nodes)
    new_states = list(states)
    for (e, f_e, updated), indices in zip(results, groups):
        np.add.at(force, mesh.element_dofs(e), f_e)
        for k, state in zip(indices, updated):
            new_states[k] = state
    return force, new_states


def _dofs(mesh: Mesh, node_set: str, component: str) -> np.ndarray:
    return 3 * mesh.node_set(node_set) + COMPONENTS[component]


def external_force(mesh: Mesh, config: SimConfig) -> np.ndarray:
    f = np.zeros(3 * mesh.n_nodes)
    for load in config.loads:
        f[_dofs(mesh, load.node_set, load.component)] += load.value
    return f


def initial_state(mesh: Mesh, bindings, fiber: MaterialLaw, matrix: MaterialLaw, config: SimConfig) -> SimulationState:
    n = 3 * mesh.n_nodes
    v = np.zeros(n)
    for iv in config.initial_velocity:
        nodes = mesh.node_set(iv.node_set)
        v[3 * nodes[:, None] + np.arange(3)] = np.asarray(iv.vector, dtype=float)
    return SimulationState(0, 0.0, np.zeros(n), v, np.zeros(n), initial_states(bindings, fiber, matrix))


def explicit_step(
    mesh: Mesh,
    bindings: Sequence[QuadPointBinding],
    state: SimulationState,
    config: SimConfig,
    mass: np.ndarray,
    f_ext: np.ndarray,
    threads: int = 1,
) -> SimulationState:
    """One central-difference step; boundary conditions are enforced on the new velocities."""
    dt = config.dt
    t_new = state.time + dt
    a = (f_ext - state.f_int) / mass
    v = state.v + a * dt
    for bc in config.boundary_conditions:
        dofs = _dofs(mesh, bc.node_set, bc.component)
        target = bc.displacement(t_new, config.t_end)
        v[dofs] = bc.velocity(state.time, config.t_end) if target is None else (target - state.u[dofs]) / dt
    du = v * dt
    u = state.u + du
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise BlowUpError(f'non-finite kinematics at step {state.step + 1}', last_stable_time=state.time)

    f_int, states = assemble_internal_force(mesh, bindings, state.states, du, threads=threads)
    if not np.all(np.isfinite(f_int)):
        raise BlowUpError(f'non-finite internal force at step {state.step + 1}', last_stable_time=state.time)
    return SimulationState(
        step=state.step + 1,
        time=t_new,
        u=u,
        v=v,
        f_int=f_int,
        states=states,
        internal_work=state.internal_work + 0.5 * float(np.dot(du, state.f_int + f_int)),
        external_work=state.external_work + float(np.dot(du, f_ext)),
    )


def reaction_forces(mesh: Mesh, state: SimulationState, config: SimConfig, f_ext: np.ndarray) -> Dict[str, float]:
    reactions = {}
    for bc in config.boundary_conditions:
        dofs = _dofs(mesh, bc.node_set, bc.component)
        reactions[f'R_{bc.node_set}_{bc.component}'] = float(np.sum(state.f_int[dofs] - f_ext[dofs]))
    return reactions


def stress_field(bindings: Sequence[QuadPointBinding], mesh: Mesh, states: Sequence[NetworkState]) -> pd.DataFrame:
    rows = []
    for bp, st in zip(bindings, states):
        rows.append([int(mesh.element_ids[bp.element]), bp.point, *tensor_components(st.stress), homogenized_eps(st)])
    return pd.DataFrame(rows, columns=FIELD_COLUMNS)


def run_simulation(
    mesh: Mesh,
    bindings: Sequence[QuadPointBinding],
    fiber: MaterialLaw,
    matrix: MaterialLaw,
    config: SimConfig,
    state: Optional[SimulationState] = None,
    threads: int = 1,
) -> SimulationResult:
    """
    Time loop up to config.t_end, optionally resumed from a snapshot.

    The history holds time, kinetic energy, internal and external work and
    the reaction on every constrained set at the output cadence.
    """
    safety = getattr(settings, 'DMN_CFL_SAFETY', 0.9)
    dt_critical = critical_time_step(mesh, bindings, fiber, matrix)
    logger.info(f'Stable time step estimate {dt_critical:.3e} s, using dt={config.dt:.3e} s')
    if config.dt > safety * dt_critical:
        if not config.allow_dt_override:
            raise CFLViolationError(config.dt, safety * dt_critical)
        logger.warning(f'dt exceeds {safety} x stable estimate; continuing on request')

    mass = lumped_mass(mesh, bindings)
    if np.any(mass <= 0):
        raise ConfigurationError('lumped mass must be positive at every node')
    f_ext = external_force(mesh, config)
    state = state.snapshot() if state is not None else initial_state(mesh, bindings, fiber, matrix, config)

    rows = []
    snapshots = []

    def record(s: SimulationState):
        rows.append({
            'step': s.step,
            'time': s.time,
            'kinetic_energy': s.kinetic_energy(mass),
            'internal_work': s.internal_work,
            'external_work': s.external_work,
            **reaction_forces(mesh, s, config, f_ext),
        })

    if state.step == 0:
        record(state)
    n_steps = config.n_steps
    while state.step < n_steps:
        state = explicit_step(mesh, bindings, state, config, mass, f_ext, threads=threads)
        if state.step % config.output_every == 0 or state.step == n_steps:
            record(state)
        if config.snapshot_every and state.step % config.snapshot_every == 0:
            snapshots.append((state.step, state.time, state.u.copy(), stress_field(bindings, mesh, state.states)))
    logger.info(f'Simulation reached t={state.time:.4e} s after {state.step} steps')
    return SimulationResult(pd.DataFrame(rows), snapshots, state)
