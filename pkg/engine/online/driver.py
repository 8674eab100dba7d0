"""
Point-simulation driver: one material point under a prescribed strain path.
"""
import logging
from typing import Optional

import numpy as np
import pandas as pd

from config.exceptions import NonConvergenceError
from materials.laws import MaterialLaw
from mechanics.mandel import tensor_components
from network.topology import Network
from .state import NetworkState, homogenized_eps, network_step

logger = logging.getLogger(__name__)

STRESS_COLUMNS = ['s11', 's22', 's33', 's12', 's23', 's31']
HISTORY_COLUMNS = ['step'] + STRESS_COLUMNS + ['eps_hom']


def uniaxial_strain_path(total: float, n_steps: int, component: int = 0) -> np.ndarray:
    """Equal Mandel increments along one component, shape (n_steps, 6)."""
    increments = np.zeros((n_steps, 6))
    increments[:, component] = total / n_steps
    return increments


def run_point_simulation(
    network: Network,
    fiber: MaterialLaw,
    matrix: MaterialLaw,
    increments: np.ndarray,
    steps: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> pd.DataFrame:
    """
    Drive one network through Mandel strain increments of shape (n, 6).

    Returns the stress history as plain tensor components plus the
    homogenized equivalent plastic strain after every step.
    """
    increments = np.asarray(increments, dtype=float).reshape(-1, 6)
    steps = np.arange(1, len(increments) + 1) if steps is None else np.asarray(steps)
    state = NetworkState.initial(network, fiber, matrix)
    rows = []
    iterations = 0
    for step, deps in zip(steps, increments):
        try:
            result = network_step(state, deps, tol=tol, max_iter=max_iter)
        except NonConvergenceError as e:
            raise NonConvergenceError(str(e), residual=e.residual, location=f'step {step}') from e
        state = result.state
        iterations += result.iterations
        rows.append([int(step), *tensor_components(state.stress), homogenized_eps(state)])
    if len(increments):
        logger.info(
            f'Point simulation finished {len(increments)} steps, '
            f'{iterations / len(increments):.2f} iterations per step'
        )
    return pd.DataFrame(rows, columns=HISTORY_COLUMNS)
