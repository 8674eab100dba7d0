"""
Isotropic hardening laws for the matrix phase.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from config.exceptions import MaterialParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExponentialHardening:
    """s_Y = s1 + s2 * eps_p - s3 * exp(-h0 * eps_p)."""
    h0: float
    s1: float
    s2: float
    s3: float

    kind = 'exponential'

    def __post_init__(self):
        if self.s1 - self.s3 <= 0:
            raise MaterialParameterError(
                f'initial yield stress s1 - s3 = {self.s1 - self.s3} MPa must be positive'
            )

    def yield_stress(self, eps_p):
        eps_p = np.asarray(eps_p, dtype=float)
        return self.s1 + self.s2 * eps_p - self.s3 * np.exp(-self.h0 * eps_p)

    def slope(self, eps_p):
        eps_p = np.asarray(eps_p, dtype=float)
        return self.s2 + self.s3 * self.h0 * np.exp(-self.h0 * eps_p)

    def as_dict(self) -> dict:
        return {'type': self.kind, 'h0': self.h0, 's1': self.s1, 's2': self.s2, 's3': self.s3}


@dataclass(frozen=True)
class PiecewiseLinearHardening:
    """
    Tabulated (eps_p, s_Y) curve.

    Linear interpolation between points, final-segment extrapolation beyond the
    last one. A single point means perfect plasticity.
    """
    strains: Tuple[float, ...]
    stresses: Tuple[float, ...]

    kind = 'table'

    def __post_init__(self):
        strains = np.asarray(self.strains, dtype=float)
        stresses = np.asarray(self.stresses, dtype=float)
        if strains.size == 0 or strains.shape != stresses.shape:
            raise MaterialParameterError('hardening table needs matching, non-empty strain and stress columns')
        if np.any(np.diff(strains) <= 0):
            raise MaterialParameterError('hardening table strains must be strictly increasing')
        if strains[0] < 0:
            raise MaterialParameterError('hardening table strains must be non-negative')
        if self.yield_stress(0.0) <= 0 or np.any(stresses <= 0):
            raise MaterialParameterError('hardening table yield stresses must be positive')

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> 'PiecewiseLinearHardening':
        rows = [tuple(float(v) for v in row) for row in rows]
        return cls(tuple(r[0] for r in rows), tuple(r[1] for r in rows))

    def _segment_slopes(self) -> np.ndarray:
        return np.diff(self.stresses) / np.diff(self.strains)

    def yield_stress(self, eps_p):
        eps_p = np.asarray(eps_p, dtype=float)
        strains = np.asarray(self.strains)
        stresses = np.asarray(self.stresses)
        if strains.size == 1:
            return np.full_like(eps_p, stresses[0])
        value = np.interp(eps_p, strains, stresses)
        beyond = eps_p > strains[-1]
        return value + np.where(beyond, self._segment_slopes()[-1] * (eps_p - strains[-1]), 0.0)

    def slope(self, eps_p):
        eps_p = np.asarray(eps_p, dtype=float)
        strains = np.asarray(self.strains)
        if strains.size == 1:
            return np.zeros_like(eps_p)
        slopes = self._segment_slopes()
        index = np.clip(np.searchsorted(strains, eps_p, side='right') - 1, 0, slopes.size - 1)
        return np.where(eps_p < strains[0], 0.0, slopes[index])

    def as_dict(self) -> dict:
        return {'type': self.kind, 'table': [[e, s] for e, s in zip(self.strains, self.stresses)]}


def yield_stress(eps_p, params) -> np.ndarray:
    """Current yield stress in MPa for equivalent plastic strain eps_p >= 0."""
    if np.any(np.asarray(eps_p) < 0):
        raise MaterialParameterError('equivalent plastic strain must be non-negative')
    return params.yield_stress(eps_p)
