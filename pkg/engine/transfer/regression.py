"""
Linear regression of trainable parameters over anchor networks and per-point instantiation.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression

from config.exceptions import AnchorDegeneracyError, TopologyError
from mechanics.mandel import angles_from_matrix, rotation_matrix
from network.topology import Network

from .orientation import Descriptor, OrientationTensor, descriptor_of

logger = logging.getLogger(__name__)

ANCHOR_DESCRIPTORS: Tuple[Descriptor, ...] = (
    Descriptor(0.08, 1.0 / 3.0, 1.0 / 3.0),
    Descriptor(0.08, 0.5, 0.5),
    Descriptor(0.08, 1.0, 0.0),
    Descriptor(0.35, 1.0, 0.0),
)
ANCHOR_NAMES = ('random3d_vf08', 'planar_vf08', 'aligned_vf08', 'aligned_vf35')
VF_HULL = (0.08, 0.35)
DESIGN_COND_LIMIT = 1e12
ANGLE_SPREAD_LIMIT = np.pi / 2


@dataclass(frozen=True)
class Anchor:
    descriptor: Descriptor
    network: Network
    name: str = ''


@dataclass(frozen=True, eq=False)
class AnchorSet:
    anchors: Tuple[Anchor, ...]
    model: LinearRegression
    n_layers: int
    wide_angles: Tuple[int, ...] = field(default=())

    @property
    def coefficients(self) -> np.ndarray:
        """(P, 4) rows [c0, c_vf, c_a11, c_a22] per trainable parameter."""
        return np.column_stack([self.model.intercept_, self.model.coef_])

    def predict(self, descriptor: Descriptor) -> np.ndarray:
        return self.model.predict(descriptor.as_array()[None, :])[0]


def design_matrix(descriptors: Sequence[Descriptor]) -> np.ndarray:
    return np.array([[1.0, d.vf, d.a11, d.a22] for d in descriptors])


def fit_anchor_regression(anchors: Sequence[Anchor]) -> AnchorSet:
    """
    Fit y = c0 + c1*vf + c2*a11 + c3*a22 for every trainable through four anchors.
    """
    anchors = tuple(anchors)
    if len(anchors) != 4:
        raise AnchorDegeneracyError(f'exactly 4 anchors are required, got {len(anchors)}')
    n_layers = anchors[0].network.n_layers
    if any(a.network.n_layers != n_layers for a in anchors):
        raise TopologyError('anchor networks have different depths')

    descriptors = [a.descriptor for a in anchors]
    cond = np.linalg.cond(design_matrix(descriptors))
    if not np.isfinite(cond) or cond > DESIGN_COND_LIMIT:
        raise AnchorDegeneracyError(f'anchor descriptor design matrix is singular (cond={cond:.3e})')

    features = np.array([d.as_array() for d in descriptors])
    targets = np.stack([a.network.parameter_vector() for a in anchors])
    model = LinearRegression(fit_intercept=True).fit(features, targets)

    n_bottom = 2 ** (n_layers - 1)
    spread = targets[:, n_bottom:].max(axis=0) - targets[:, n_bottom:].min(axis=0)
    wide = tuple(int(i) for i in np.flatnonzero(spread > ANGLE_SPREAD_LIMIT))
    if wide:
        logger.warning(
            f'{len(wide)} anchor angle(s) spread more than pi/2 across anchors; '
            f'interpolated rotations may be unreliable'
        )
    logger.info(f'Fitted anchor regression over {targets.shape[1]} parameters, design cond={cond:.2f}')
    return AnchorSet(anchors, model, n_layers, wide)


def in_hull(vf: float) -> bool:
    return VF_HULL[0] <= vf <= VF_HULL[1]


def instantiate_network(anchors: AnchorSet, a: OrientationTensor, vf: float) -> Network:
    """
    Network for a local microstructure, expressed in the global frame.

    Parameters come from the regression in the principal frame of `a`; the
    principal axes are then composed into the top node rotation.
    """
    descriptor, frame = descriptor_of(a, vf)
    extrapolated = not in_hull(descriptor.vf)
    if extrapolated:
        logger.warning(f'vf={descriptor.vf:.4f} outside anchor range {VF_HULL}; extrapolating')

    net = Network.from_parameter_vector(anchors.n_layers, anchors.predict(descriptor))
    angles = np.array(net.angles)
    if not np.allclose(frame, np.eye(3), rtol=0.0, atol=1e-14):
        angles[0] = angles_from_matrix(rotation_matrix(angles[0]) @ frame.T)

    provenance: Dict = {
        'init': 'transfer',
        'descriptor': [descriptor.vf, descriptor.a11, descriptor.a22],
        'extrapolated': extrapolated,
    }
    return Network(net.n_layers, net.z, angles, provenance)
