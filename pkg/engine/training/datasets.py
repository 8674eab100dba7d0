"""
Synthetic linear-elastic training data.

Composite stiffnesses come from a seeded teacher network evaluated on random
orthotropic phase pairs with high phase contrast.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np

from config.exceptions import SamplingError
from mechanics.mandel import is_spd, orthotropic_stiffness
from network.forward import forward_stiffness
from network.topology import Network

logger = logging.getLogger(__name__)

MATRIX_MODULUS_RANGE = (1.0, 1e2)
FIBER_MODULUS_RANGE = (1e2, 1e5)
MAX_SAMPLING_TRIES = 1000
TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class Sample:
    fiber: np.ndarray
    matrix: np.ndarray
    composite: np.ndarray


@dataclass
class Batch:
    """Stacked phase and composite stiffnesses, each of shape (n, 6, 6)."""
    fiber: np.ndarray
    matrix: np.ndarray
    composite: np.ndarray

    def __post_init__(self):
        self.fiber = np.asarray(self.fiber, dtype=float).reshape(-1, 6, 6)
        self.matrix = np.asarray(self.matrix, dtype=float).reshape(-1, 6, 6)
        self.composite = np.asarray(self.composite, dtype=float).reshape(-1, 6, 6)
        if not (len(self.fiber) == len(self.matrix) == len(self.composite)):
            raise ValueError('fiber, matrix and composite stacks differ in length')

    def __len__(self):
        return len(self.fiber)

    def subset(self, index) -> 'Batch':
        return Batch(self.fiber[index], self.matrix[index], self.composite[index])

    def samples(self) -> Iterator[Sample]:
        for f, m, c in zip(self.fiber, self.matrix, self.composite):
            yield Sample(f, m, c)

    @classmethod
    def from_samples(cls, samples: List[Sample]) -> 'Batch':
        return cls(
            np.array([s.fiber for s in samples]),
            np.array([s.matrix for s in samples]),
            np.array([s.composite for s in samples]),
        )


@dataclass
class Dataset:
    """
    Train/test split of one microstructure's samples.

    descriptor is (vf, a11, a22) when the data belongs to an anchor microstructure.
    """
    train: Batch
    test: Batch
    teacher_hash: Optional[str] = None
    descriptor: Optional[Tuple[float, float, float]] = None
    name: str = ''
    metadata: dict = field(default_factory=dict)

    def __str__(self):
        return f'{self.name or "dataset"} ({len(self.train)} train / {len(self.test)} test)'

    @property
    def samples(self) -> List[Sample]:
        return list(self.train.samples()) + list(self.test.samples())

    def __len__(self):
        return len(self.train) + len(self.test)


def _log_uniform(rng: np.random.Generator, low: float, high: float, size) -> np.ndarray:
    return 10.0 ** rng.uniform(np.log10(low), np.log10(high), size=size)


def sample_orthotropic(rng: np.random.Generator, modulus_range: Tuple[float, float]) -> np.ndarray:
    """One axis-aligned orthotropic SPD stiffness with moduli in modulus_range."""
    low, high = modulus_range
    for _ in range(MAX_SAMPLING_TRIES):
        moduli = _log_uniform(rng, low, high, 3)
        shear = 0.4 * _log_uniform(rng, low, high, 3)
        couplings = rng.uniform(-0.2, 0.7, size=3)
        r12, r23, r31 = couplings
        if 1.0 - r12 ** 2 - r23 ** 2 - r31 ** 2 - 2.0 * r12 * r23 * r31 <= 1e-3:
            continue
        c = orthotropic_stiffness(moduli, shear, couplings)
        if is_spd(c):
            return c
    raise SamplingError(f'no SPD orthotropic stiffness found in {MAX_SAMPLING_TRIES} draws')


def generate_phase_pair(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Random (C_f, C_m) with contrast up to 1e4."""
    c_f = sample_orthotropic(rng, FIBER_MODULUS_RANGE)
    c_m = sample_orthotropic(rng, MATRIX_MODULUS_RANGE)
    return c_f, c_m


def generate_teacher_dataset(
    teacher: Network,
    n: int,
    rng: np.random.Generator,
    descriptor: Optional[Tuple[float, float, float]] = None,
    name: str = '',
) -> Dataset:
    """Evaluate the teacher on n random phase pairs; the first 80% form the training split."""
    if n < 2:
        raise ValueError(f'need at least 2 samples to split, got {n}')
    pairs = [generate_phase_pair(rng) for _ in range(n)]
    fiber = np.array([p[0] for p in pairs])
    matrix = np.array([p[1] for p in pairs])
    composite = forward_stiffness(teacher, fiber, matrix)
    n_train = int(round(TRAIN_FRACTION * n))
    dataset = Dataset(
        train=Batch(fiber[:n_train], matrix[:n_train], composite[:n_train]),
        test=Batch(fiber[n_train:], matrix[n_train:], composite[n_train:]),
        teacher_hash=teacher.fingerprint(),
        descriptor=descriptor,
        name=name,
    )
    logger.info(f'Generated {dataset} from teacher {dataset.teacher_hash[:12]}')
    return dataset


def perturbed_teacher(base: Network, rng: np.random.Generator, scale: float = 0.05) -> Network:
    """Teacher close to base: Gaussian noise of the given scale on every trainable."""
    z = base.z + rng.normal(0.0, scale, size=base.z.shape)
    angles = base.angles + rng.normal(0.0, scale, size=base.angles.shape)
    return base.with_parameters(z, angles, init='perturbed', base=base.fingerprint())
