"""
Microscale constitutive laws evaluated at the bottom nodes of a network.

Every update is pure: it takes a state and a strain increment and returns the
stress increment, the algorithmic tangent, the affine correction
dsig = dsig_total - tangent @ deps and the trial state. All arrays may carry
leading batch dimensions, one entry per material point.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Tuple, Union

import numpy as np

from config.exceptions import MaterialConvergenceError, MaterialParameterError
from mechanics.mandel import DEVIATORIC_PROJECTOR, isotropic_stiffness, lame_constants
from .hardening import ExponentialHardening, PiecewiseLinearHardening

logger = logging.getLogger(__name__)

SQRT_2_3 = np.sqrt(2.0 / 3.0)
RETURN_MAP_MAX_ITER = 50
RETURN_MAP_RTOL = 1e-12


@dataclass
class MaterialState:
    """Total stress, equivalent plastic strain and plastic strain of one or more points."""
    stress: np.ndarray
    eps_p: np.ndarray
    plastic_strain: np.ndarray

    @classmethod
    def zeros(cls, shape: Tuple[int, ...] = ()) -> 'MaterialState':
        return cls(np.zeros(shape + (6,)), np.zeros(shape), np.zeros(shape + (6,)))

    def copy(self) -> 'MaterialState':
        return MaterialState(self.stress.copy(), self.eps_p.copy(), self.plastic_strain.copy())

    def where(self, mask: np.ndarray, other: 'MaterialState') -> 'MaterialState':
        """Take self where mask holds, other elsewhere."""
        m = np.asarray(mask)
        return MaterialState(
            np.where(m[..., None], self.stress, other.stress),
            np.where(m, self.eps_p, other.eps_p),
            np.where(m[..., None], self.plastic_strain, other.plastic_strain),
        )


@dataclass
class MaterialUpdate:
    dsig: np.ndarray
    tangent: np.ndarray
    correction: np.ndarray
    state: MaterialState


@dataclass(frozen=True)
class ElasticLaw:
    """Linear isotropic elasticity."""
    E: float
    nu: float
    density: float = 0.0

    tag = 'elastic'

    def __post_init__(self):
        lame_constants(self.E, self.nu)
        if self.density < 0:
            raise MaterialParameterError(f'density must be non-negative, got {self.density}')

    @cached_property
    def stiffness(self) -> np.ndarray:
        return isotropic_stiffness(self.E, self.nu)

    def update(self, state: MaterialState, deps: np.ndarray) -> MaterialUpdate:
        deps = np.asarray(deps, dtype=float)
        dsig = deps @ self.stiffness
        new_state = MaterialState(state.stress + dsig, state.eps_p.copy(), state.plastic_strain.copy())
        tangent = np.broadcast_to(self.stiffness, deps.shape[:-1] + (6, 6))
        return MaterialUpdate(dsig, tangent, np.zeros_like(deps), new_state)

    def as_dict(self) -> dict:
        return {'law': self.tag, 'E': self.E, 'nu': self.nu, 'density': self.density}


@dataclass(frozen=True)
class J2Law:
    """von Mises plasticity with isotropic hardening, integrated by radial return."""
    E: float
    nu: float
    hardening: Union[ExponentialHardening, PiecewiseLinearHardening]
    density: float = 0.0

    tag = 'j2'

    def __post_init__(self):
        lame_constants(self.E, self.nu)
        if self.density < 0:
            raise MaterialParameterError(f'density must be non-negative, got {self.density}')

    @cached_property
    def stiffness(self) -> np.ndarray:
        return isotropic_stiffness(self.E, self.nu)

    @cached_property
    def shear_modulus(self) -> float:
        return lame_constants(self.E, self.nu)[1]

    def _return_map(self, q: np.ndarray, eps_p: np.ndarray, f_trial: np.ndarray) -> np.ndarray:
        """Plastic multiplier solving q - 2 mu dg - sqrt(2/3) s_Y(eps_p + sqrt(2/3) dg) = 0."""
        mu = self.shear_modulus
        hardening = self.hardening
        scale = hardening.yield_stress(eps_p)
        dg = f_trial / (2.0 * mu + 2.0 / 3.0 * hardening.slope(eps_p))
        for _ in range(RETURN_MAP_MAX_ITER):
            eps_new = eps_p + SQRT_2_3 * dg
            residual = q - 2.0 * mu * dg - SQRT_2_3 * hardening.yield_stress(eps_new)
            if np.all(np.abs(residual) <= RETURN_MAP_RTOL * scale):
                return dg
            derivative = -2.0 * mu - 2.0 / 3.0 * hardening.slope(eps_new)
            dg = np.maximum(dg - residual / derivative, 0.0)
        raise MaterialConvergenceError(
            f'radial return did not converge in {RETURN_MAP_MAX_ITER} iterations '
            f'(residual {np.max(np.abs(residual)):.3e} MPa)'
        )

    def update(self, state: MaterialState, deps: np.ndarray) -> MaterialUpdate:
        deps = np.asarray(deps, dtype=float)
        c = self.stiffness
        mu = self.shear_modulus
        trial = state.stress + deps @ c
        s_trial = trial @ DEVIATORIC_PROJECTOR
        q = np.linalg.norm(s_trial, axis=-1)
        yield_now = self.hardening.yield_stress(state.eps_p)
        f_trial = q - SQRT_2_3 * yield_now
        plastic = f_trial > RETURN_MAP_RTOL * yield_now

        shape = deps.shape[:-1]
        tangent = np.array(np.broadcast_to(c, shape + (6, 6)))
        if not np.any(plastic):
            new_state = MaterialState(trial, state.eps_p.copy(), state.plastic_strain.copy())
            return MaterialUpdate(trial - state.stress, tangent, np.zeros_like(deps), new_state)

        dg = np.zeros(shape)
        dg[plastic] = self._return_map(q[plastic], state.eps_p[plastic], f_trial[plastic])
        safe_q = np.where(plastic, q, 1.0)
        normal = np.where(plastic[..., None], s_trial / safe_q[..., None], 0.0)

        stress = trial - 2.0 * mu * dg[..., None] * normal
        eps_p = state.eps_p + SQRT_2_3 * dg
        plastic_strain = state.plastic_strain + dg[..., None] * normal

        h = self.hardening.slope(eps_p)
        theta = 1.0 - 2.0 * mu * dg / safe_q
        theta_bar = 1.0 / (1.0 + h / (3.0 * mu)) - (1.0 - theta)
        softening = (
            2.0 * mu * (1.0 - theta)[..., None, None] * DEVIATORIC_PROJECTOR
            + 2.0 * mu * theta_bar[..., None, None] * (normal[..., :, None] * normal[..., None, :])
        )
        tangent = tangent - np.where(plastic[..., None, None], softening, 0.0)

        dsig = stress - state.stress
        correction = dsig - np.einsum('...ab,...b->...a', tangent, deps)
        return MaterialUpdate(dsig, tangent, correction, MaterialState(stress, eps_p, plastic_strain))

    def as_dict(self) -> dict:
        return {
            'law': self.tag, 'E': self.E, 'nu': self.nu, 'density': self.density,
            'hardening': self.hardening.as_dict(),
        }


MaterialLaw = Union[ElasticLaw, J2Law]


@dataclass(frozen=True)
class MaterialPoint:
    """One material point: its law and its committed state."""
    law: MaterialLaw
    state: MaterialState = field(default_factory=MaterialState.zeros)

    def with_state(self, state: MaterialState) -> 'MaterialPoint':
        return replace(self, state=state)


def material_update(point: MaterialPoint, deps: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, MaterialPoint]:
    """(dsig, tangent, correction, updated point) for a strain increment."""
    result = point.law.update(point.state, deps)
    return result.dsig, result.tangent, result.correction, point.with_state(result.state)


# Constituent data in mm / tonne / s / MPa.
def short_glass_fiber() -> ElasticLaw:
    return ElasticLaw(E=72000.0, nu=0.20, density=2.54e-9)


def polymer_matrix_rve() -> J2Law:
    """Matrix of the RVE verification: initial yield 0.63 MPa, perfectly plastic beyond it."""
    return J2Law(E=1616.0, nu=0.3545, hardening=PiecewiseLinearHardening((0.0,), (0.63,)), density=1e-9)


def glass_fiber_structural() -> ElasticLaw:
    return ElasticLaw(E=80000.0, nu=0.2, density=2.54e-9)


def polymer_matrix_structural() -> J2Law:
    """Matrix of the structural example: s_Y = 120 - 90 exp(-140 eps_p), 30 MPa initial yield."""
    return J2Law(
        E=3800.0, nu=0.39,
        hardening=ExponentialHardening(h0=140.0, s1=120.0, s2=0.0, s3=90.0),
        density=1e-9,
    )


PRESETS = {
    'rve': (short_glass_fiber, polymer_matrix_rve),
    'structural': (glass_fiber_structural, polymer_matrix_structural),
}
