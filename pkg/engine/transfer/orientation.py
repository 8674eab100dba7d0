"""
Fiber orientation tensors and the (vf, a11, a22) microstructure descriptor.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from config.exceptions import InvalidOrientationError

logger = logging.getLogger(__name__)

TRACE_TOL = 1e-6
EIGEN_TIE_TOL = 1e-9
COMPONENT_NAMES = ('axx', 'ayy', 'azz', 'axy', 'ayz', 'azx')


@dataclass(frozen=True, eq=False)
class OrientationTensor:
    """Second moment of the fiber direction distribution."""
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.shape != (3, 3):
            raise InvalidOrientationError(f'orientation tensor must be 3x3, got shape {a.shape}')
        if np.max(np.abs(a - a.T)) > 1e-9 * max(1.0, np.abs(a).max()):
            raise InvalidOrientationError('orientation tensor is not symmetric')
        a.setflags(write=False)
        object.__setattr__(self, 'a', a)

    @classmethod
    def from_components(cls, axx, ayy, azz, axy, ayz, azx) -> 'OrientationTensor':
        return cls(np.array([
            [axx, axy, azx],
            [axy, ayy, ayz],
            [azx, ayz, azz],
        ], dtype=float))

    def components(self) -> Tuple[float, ...]:
        a = self.a
        return (a[0, 0], a[1, 1], a[2, 2], a[0, 1], a[1, 2], a[2, 0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.a))

    def normalized(self) -> 'OrientationTensor':
        return OrientationTensor(self.a / self.trace)

    def rotated(self, q: np.ndarray) -> 'OrientationTensor':
        q = np.asarray(q, dtype=float)
        return OrientationTensor(q @ self.a @ q.T)

    def key(self, digits: int = 12) -> Tuple[float, ...]:
        return tuple(round(float(v), digits) for v in self.components())


@dataclass(frozen=True)
class Descriptor:
    """Fiber volume fraction and the two largest orientation eigenvalues."""
    vf: float
    a11: float
    a22: float

    @property
    def a33(self) -> float:
        return 1.0 - self.a11 - self.a22

    def as_array(self) -> np.ndarray:
        return np.array([self.vf, self.a11, self.a22])

    def in_triangle(self, tol: float = 1e-9) -> bool:
        """a11 >= a22 >= a33 >= 0 within tol."""
        return self.a11 + tol >= self.a22 and self.a22 + tol >= self.a33 and self.a33 >= -tol


def orientation_from_fibers(directions: Sequence[Sequence[float]]) -> OrientationTensor:
    """Empirical orientation tensor mean(p x p) of unit fiber directions."""
    p = np.asarray(directions, dtype=float).reshape(-1, 3)
    if p.shape[0] == 0:
        raise InvalidOrientationError('no fiber directions given')
    norms = np.linalg.norm(p, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise InvalidOrientationError('fiber directions must be unit vectors')
    a = np.einsum('ni,nj->ij', p, p) / p.shape[0]
    return OrientationTensor(0.5 * (a + a.T) / np.trace(a))


def random_directions(n: int, rng: np.random.Generator) -> np.ndarray:
    """Directions uniformly distributed on the sphere."""
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def planar_random_directions(n: int, rng: np.random.Generator) -> np.ndarray:
    """Directions uniformly distributed in the x-y plane."""
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.stack([np.cos(phi), np.sin(phi), np.zeros(n)], axis=1)


def aligned_directions(n: int, axis: int = 0) -> np.ndarray:
    p = np.zeros((n, 3))
    p[:, axis] = 1.0
    return p


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    for component in v:
        if abs(component) > 1e-8:
            return v if component > 0 else -v
    return v


def _subspace_basis(vectors: np.ndarray) -> np.ndarray:
    """Deterministic basis of a degenerate eigenspace from projected global axes."""
    projector = vectors @ vectors.T
    chosen = []
    for axis in np.eye(3):
        candidate = projector @ axis
        for done in chosen:
            candidate = candidate - np.dot(done, candidate) * done
        norm = np.linalg.norm(candidate)
        if norm > 1e-6:
            chosen.append(candidate / norm)
        if len(chosen) == vectors.shape[1]:
            break
    return np.stack(chosen, axis=1)


def principal_frame(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues in descending order and a proper rotation whose columns are the principal axes.

    Tied eigenvalues get their axes from the global axes projected onto the
    shared eigenspace, taken in x, y, z order.
    """
    values, vectors = np.linalg.eigh(a)
    order = np.argsort(-values, kind='stable')
    values = values[order]
    vectors = vectors[:, order]

    frame = np.empty((3, 3))
    start = 0
    while start < 3:
        stop = start + 1
        while stop < 3 and values[start] - values[stop] <= EIGEN_TIE_TOL:
            stop += 1
        if stop - start == 1:
            frame[:, start] = _canonical_sign(vectors[:, start])
        else:
            # tie: global x, y, z projected onto the eigenspace, first independent ones win
            frame[:, start:stop] = _subspace_basis(vectors[:, start:stop])
        start = stop
    if np.linalg.det(frame) < 0:
        frame[:, 2] = -frame[:, 2]
    return values, frame


def descriptor_of(a: OrientationTensor, vf: float) -> Tuple[Descriptor, np.ndarray]:
    """
    Descriptor and principal frame of an orientation tensor.

    The frame's columns are the principal axes in global coordinates, so
    frame.T maps global components to principal ones.
    """
    if not isinstance(a, OrientationTensor):
        a = OrientationTensor(np.asarray(a, dtype=float))
    if abs(a.trace - 1.0) > TRACE_TOL:
        raise InvalidOrientationError(f'orientation tensor trace {a.trace:.8f} deviates from 1')
    if not 0.0 < vf < 1.0:
        raise InvalidOrientationError(f'fiber volume fraction {vf} outside (0, 1)')
    values, frame = principal_frame(a.a)
    if values[-1] < -1e-9 or values[0] > 1.0 + 1e-9:
        raise InvalidOrientationError(f'orientation eigenvalues {values} outside [0, 1]')
    values = np.clip(values, 0.0, None) / np.clip(values, 0.0, None).sum()
    return Descriptor(vf=float(vf), a11=float(values[0]), a22=float(values[1])), frame
