"""
Binary-tree topology of a deep material network.

Layers are numbered 0 (top) to N-1 (bottom). Node k of layer l has children
2k (left, phase-1 slot) and 2k+1 (right, phase-2 slot) in layer l+1; angles
are stored breadth first, node (l, k) at row 2**l - 1 + k.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional

import numpy as np

from config.exceptions import TopologyError
from mechanics.mandel import rotation6, rotation6_with_derivatives

logger = logging.getLogger(__name__)

FIBER = 'fiber'
MATRIX = 'matrix'


class PhaseAssignment:
    """
    Phase of each bottom node.

    With 1-based node numbers even nodes hold fiber and odd nodes hold matrix,
    i.e. every left child at the bottom is matrix and every right child fiber.
    """

    @staticmethod
    def phase_of(k: int) -> str:
        """Phase of 1-based bottom node k."""
        return FIBER if k % 2 == 0 else MATRIX

    @staticmethod
    def fiber_mask(n_bottom: int) -> np.ndarray:
        """Boolean mask over 0-based bottom indices."""
        return np.arange(n_bottom) % 2 == 1

    @staticmethod
    def matrix_mask(n_bottom: int) -> np.ndarray:
        return np.arange(n_bottom) % 2 == 0


def layer_size(layer: int) -> int:
    return 2 ** layer


def node_row(layer: int, k: int) -> int:
    return 2 ** layer - 1 + k


@dataclass(frozen=True)
class BlockLayout:
    """
    Per-layer block data: f = w_right / (w_left + w_right), dead-child masks and
    the indices of blocks with two live children, the only ones that need a solve.

    Blocks without live children get f = 0.5; their output is never used.
    """
    f: np.ndarray
    dead_left: np.ndarray
    dead_right: np.ndarray
    live_index: np.ndarray

    @classmethod
    def from_weights(cls, w_left: np.ndarray, w_right: np.ndarray) -> 'BlockLayout':
        total = w_left + w_right
        live = total > 0
        f = np.where(live, w_right / np.where(live, total, 1.0), 0.5)
        dead_left = w_left <= 0
        dead_right = w_right <= 0
        live_index = np.flatnonzero(~(dead_left | dead_right))
        return cls(f=f, dead_left=dead_left, dead_right=dead_right, live_index=live_index)

    @property
    def live(self) -> np.ndarray:
        return ~(self.dead_left | self.dead_right)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Network:
    """
    Immutable deep material network.

    Attributes:
        n_layers: number of layers N >= 2
        z: bottom activations, shape (2**(N-1),)
        angles: Euler angles per node, shape (2**N - 1, 3)
        provenance: free-form metadata (seed, config hash, descriptor)
    """
    n_layers: int
    z: np.ndarray
    angles: np.ndarray
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_layers < 2:
            raise TopologyError(f'a network needs at least 2 layers, got {self.n_layers}')
        n_bottom = 2 ** (self.n_layers - 1)
        n_nodes = 2 ** self.n_layers - 1
        z = np.asarray(self.z, dtype=float).reshape(-1)
        angles = np.asarray(self.angles, dtype=float).reshape(-1, 3) if np.size(self.angles) else np.empty((0, 3))
        if z.shape != (n_bottom,):
            raise TopologyError(f'expected {n_bottom} activations for {self.n_layers} layers, got {z.size}')
        if angles.shape != (n_nodes, 3):
            raise TopologyError(f'expected {n_nodes} angle triples for {self.n_layers} layers, got {angles.shape[0]}')
        object.__setattr__(self, 'z', _readonly(z))
        object.__setattr__(self, 'angles', _readonly(angles))
        object.__setattr__(self, 'provenance', dict(self.provenance))

    def __str__(self):
        return f'Network(N={self.n_layers}, active={self.active_bottom_nodes()}, hash={self.fingerprint()[:12]})'

    @property
    def n_bottom(self) -> int:
        return 2 ** (self.n_layers - 1)

    @property
    def n_nodes(self) -> int:
        return 2 ** self.n_layers - 1

    @cached_property
    def weights(self) -> List[np.ndarray]:
        """Node weights per layer, top first; bottom weights are ReLU(z)."""
        layers = [np.maximum(self.z, 0.0)]
        for _ in range(self.n_layers - 1):
            child = layers[0]
            layers.insert(0, child[0::2] + child[1::2])
        for w in layers:
            w.setflags(write=False)
        return layers

    @cached_property
    def blocks(self) -> List[BlockLayout]:
        """Phase-2 fractions and dead-child masks of every internal layer, top first."""
        layouts = []
        for layer in range(self.n_layers - 1):
            children = self.weights[layer + 1]
            layouts.append(BlockLayout.from_weights(children[0::2], children[1::2]))
        return layouts

    @property
    def total_weight(self) -> float:
        return float(self.weights[0][0])

    def layer_angles(self, layer: int) -> np.ndarray:
        start = 2 ** layer - 1
        return self.angles[start:start + 2 ** layer]

    @cached_property
    def rotations(self) -> List[np.ndarray]:
        """Mandel rotation operators per layer, each of shape (2**l, 6, 6)."""
        return [rotation6(self.layer_angles(layer)) for layer in range(self.n_layers)]

    @cached_property
    def rotation_derivatives(self) -> List[np.ndarray]:
        """d rotation6 / d(alpha, beta, gamma) per layer, each of shape (2**l, 3, 6, 6)."""
        return [rotation6_with_derivatives(self.layer_angles(layer))[1] for layer in range(self.n_layers)]

    def with_parameters(self, z: np.ndarray, angles: np.ndarray, **provenance) -> 'Network':
        info = dict(self.provenance)
        info.update(provenance)
        return Network(self.n_layers, z, angles, info)

    def parameter_vector(self) -> np.ndarray:
        """Trainables flattened as [z, alpha/beta/gamma per node]."""
        return np.concatenate([self.z, self.angles.reshape(-1)])

    @classmethod
    def from_parameter_vector(cls, n_layers: int, vector: np.ndarray, provenance: Optional[Dict] = None) -> 'Network':
        n_bottom = 2 ** (n_layers - 1)
        vector = np.asarray(vector, dtype=float)
        return cls(n_layers, vector[:n_bottom], vector[n_bottom:].reshape(-1, 3), provenance or {})

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.int64(self.n_layers).tobytes())
        digest.update(np.ascontiguousarray(self.z).tobytes())
        digest.update(np.ascontiguousarray(self.angles).tobytes())
        return digest.hexdigest()

    def active_bottom_nodes(self) -> Dict[str, int]:
        live = self.weights[-1] > 0
        return {
            FIBER: int(np.count_nonzero(live & PhaseAssignment.fiber_mask(self.n_bottom))),
            MATRIX: int(np.count_nonzero(live & PhaseAssignment.matrix_mask(self.n_bottom))),
        }

    def fiber_fraction(self) -> float:
        """Share of the total weight carried by fiber bottom nodes."""
        w = self.weights[-1]
        total = w.sum()
        if total <= 0:
            return 0.0
        return float(w[PhaseAssignment.fiber_mask(self.n_bottom)].sum() / total)

    def regularization_target(self) -> float:
        return 2.0 ** (self.n_layers - 2)


def build_network(n_layers: int, seed: int) -> Network:
    """Randomly initialized network: z ~ U(0.4, 0.6), angles ~ U(-pi/4, pi/4)."""
    if n_layers < 2:
        raise TopologyError(f'a network needs at least 2 layers, got {n_layers}')
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.4, 0.6, size=2 ** (n_layers - 1))
    angles = rng.uniform(-np.pi / 4, np.pi / 4, size=(2 ** n_layers - 1, 3))
    logger.debug(f'Built {n_layers}-layer network from seed {seed}')
    return Network(n_layers, z, angles, {'seed': int(seed), 'init': 'random'})
