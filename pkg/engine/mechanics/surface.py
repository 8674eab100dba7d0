"""
Direction-dependent Young's modulus surfaces of anisotropic stiffness matrices.
"""
import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd

from config.exceptions import SingularStiffnessError
from .mandel import MandelMatrix6, tensor_to_mandel

logger = logging.getLogger(__name__)

SURFACE_COLUMNS = ['nx', 'ny', 'nz', 'E_MPa']


def sphere_directions(n_theta: int, n_phi: int) -> np.ndarray:
    """Latitude-longitude unit directions, shape (n_theta * n_phi, 3)."""
    if n_theta < 2 or n_phi < 1:
        raise ValueError('need n_theta >= 2 and n_phi >= 1')
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    t, p = np.meshgrid(theta, phi, indexing='ij')
    return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1).reshape(-1, 3)


def compliance_of(c: MandelMatrix6) -> MandelMatrix6:
    c = np.asarray(c, dtype=float)
    if np.linalg.cond(c) > 1e14:
        raise SingularStiffnessError('stiffness matrix is singular and cannot be inverted')
    try:
        return np.linalg.inv(c)
    except np.linalg.LinAlgError as e:
        raise SingularStiffnessError(f'stiffness inversion failed: {e}') from e


def directional_modulus(c: MandelMatrix6, directions: np.ndarray) -> np.ndarray:
    """E(d) = 1 / (d x d : S : d x d) for unit directions of shape (..., 3)."""
    s = compliance_of(c)
    d = np.asarray(directions, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    n = tensor_to_mandel(d[..., :, None] * d[..., None, :])
    return 1.0 / np.einsum('...a,ab,...b->...', n, s, n)


def modulus_surface(c: MandelMatrix6, n_theta: int, n_phi: int) -> List[Tuple[np.ndarray, float]]:
    """Sample the Young's modulus surface on a latitude-longitude grid."""
    directions = sphere_directions(n_theta, n_phi)
    moduli = directional_modulus(c, directions)
    return [(d, float(e)) for d, e in zip(directions, moduli)]


def modulus_surface_frame(c: MandelMatrix6, n_theta: int, n_phi: int) -> pd.DataFrame:
    directions = sphere_directions(n_theta, n_phi)
    frame = pd.DataFrame(directions, columns=SURFACE_COLUMNS[:3])
    frame['E_MPa'] = directional_modulus(c, directions)
    return frame


def plot_modulus_surface(frame: pd.DataFrame, n_theta: int, n_phi: int, path: Path) -> Path:
    """Render the surface with radius E(d) along each direction."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    from matplotlib import cm

    radius = frame['E_MPa'].to_numpy().reshape(n_theta, n_phi)
    xyz = frame[['nx', 'ny', 'nz']].to_numpy().reshape(n_theta, n_phi, 3) * radius[..., None]
    # Close the longitude seam.
    xyz = np.concatenate([xyz, xyz[:, :1]], axis=1)
    radius = np.concatenate([radius, radius[:, :1]], axis=1)

    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(projection='3d')
    colors = cm.viridis((radius - radius.min()) / max(np.ptp(radius), 1e-30))
    ax.plot_surface(xyz[..., 0], xyz[..., 1], xyz[..., 2], facecolors=colors, linewidth=0, antialiased=True)
    limit = radius.max()
    ax.set_xlim(-limit, limit)
    ax.set_ylim(-limit, limit)
    ax.set_zlim(-limit, limit)
    ax.set_xlabel('x [MPa]')
    ax.set_ylabel('y [MPa]')
    ax.set_zlabel('z [MPa]')
    mappable = cm.ScalarMappable(cmap=cm.viridis)
    mappable.set_array(radius)
    fig.colorbar(mappable, ax=ax, shrink=0.6, label="Young's modulus [MPa]")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info(f'Modulus surface plot written to {path}')
    return path
