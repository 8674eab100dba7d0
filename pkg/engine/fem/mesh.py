"""
Hexahedral meshes: text format parser, structured box meshes and hex8 kinematics.

Mesh file records (one per line, '#' starts a comment):

    node <id> <x> <y> <z>
    hex <id> <n1> ... <n8>
    nset <name> <node id> ...
    elset <name> <element id> ...

Coordinates are in mm. Hex node order follows the usual convention: the
bottom face counter-clockwise, then the top face.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from config.exceptions import MeshFileError
from mechanics.mandel import SQRT2

logger = logging.getLogger(__name__)

HEX_CORNERS = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float)
HEX_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)
GAUSS_POINTS = HEX_CORNERS / np.sqrt(3.0)
GAUSS_WEIGHTS = np.ones(8)


@dataclass
class Mesh:
    """
    Node coordinates, hex8 connectivity (0-based indices) and named sets.

    node_ids and element_ids keep the ids used in the mesh file.
    """
    node_ids: np.ndarray
    coords: np.ndarray
    element_ids: np.ndarray
    connectivity: np.ndarray
    node_sets: Dict[str, np.ndarray] = field(default_factory=dict)
    element_sets: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.node_ids = np.asarray(self.node_ids, dtype=int)
        self.coords = np.asarray(self.coords, dtype=float).reshape(-1, 3)
        self.element_ids = np.asarray(self.element_ids, dtype=int)
        self.connectivity = np.asarray(self.connectivity, dtype=int).reshape(-1, 8)
        if self.connectivity.size and (self.connectivity.min() < 0 or self.connectivity.max() >= len(self.coords)):
            raise MeshFileError('element connectivity refers to missing nodes')

    def __str__(self):
        return f'Mesh({self.n_nodes} nodes, {self.n_elements} hex8 elements)'

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_elements(self) -> int:
        return len(self.connectivity)

    def element_dofs(self, e: int) -> np.ndarray:
        """Global DOF numbers (node-major x, y, z) of element e."""
        nodes = self.connectivity[e]
        return (3 * nodes[:, None] + np.arange(3)[None, :]).ravel()

    def node_set(self, name: str) -> np.ndarray:
        if name not in self.node_sets:
            raise MeshFileError(f"unknown node set '{name}'")
        return self.node_sets[name]

    def element_coords(self, e: int) -> np.ndarray:
        return self.coords[self.connectivity[e]]

    def min_edge_length(self, e: int) -> float:
        x = self.element_coords(e)
        return float(min(np.linalg.norm(x[a] - x[b]) for a, b in HEX_EDGES))


def shape_functions(xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Hex8 shape functions N (8,) and local gradients dN/dxi (3, 8) at one point."""
    s = 1.0 + HEX_CORNERS * np.asarray(xi, dtype=float)[None, :]
    n = np.prod(s, axis=1) / 8.0
    dn = np.empty((3, 8))
    dn[0] = HEX_CORNERS[:, 0] * s[:, 1] * s[:, 2] / 8.0
    dn[1] = HEX_CORNERS[:, 1] * s[:, 0] * s[:, 2] / 8.0
    dn[2] = HEX_CORNERS[:, 2] * s[:, 0] * s[:, 1] / 8.0
    return n, dn


def strain_displacement(grad: np.ndarray) -> np.ndarray:
    """
    Mandel B matrix (6, 24) from global shape gradients grad (3, 8).

    Acting on node-major element displacements it gives the Mandel strain.
    """
    b = np.zeros((6, 24))
    gx, gy, gz = grad
    b[0, 0::3] = gx
    b[1, 1::3] = gy
    b[2, 2::3] = gz
    b[3, 0::3], b[3, 1::3] = gy / SQRT2, gx / SQRT2
    b[4, 1::3], b[4, 2::3] = gz / SQRT2, gy / SQRT2
    b[5, 2::3], b[5, 0::3] = gx / SQRT2, gz / SQRT2
    return b


def element_kinematics(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    B matrices (8, 6, 24), Jacobian determinants (8,) and shape values (8, 8) at the Gauss points.
    """
    b = np.empty((8, 6, 24))
    det_j = np.empty(8)
    shapes = np.empty((8, 8))
    for q, xi in enumerate(GAUSS_POINTS):
        n, dn = shape_functions(xi)
        jac = dn @ x
        det_j[q] = np.linalg.det(jac)
        if det_j[q] <= 0.0:
            raise MeshFileError(f'non-positive Jacobian ({det_j[q]:.3e}) at quadrature point {q}')
        b[q] = strain_displacement(np.linalg.solve(jac, dn))
        shapes[q] = n
    return b, det_j, shapes


def element_volume(x: np.ndarray) -> float:
    _, det_j, _ = element_kinematics(x)
    return float(np.dot(GAUSS_WEIGHTS, det_j))


def box_mesh(
    nx: int,
    ny: int,
    nz: int,
    lengths: Sequence[float] = (1.0, 1.0, 1.0),
    origin: Sequence[float] = (0.0, 0.0, 0.0),
) -> Mesh:
    """Structured brick mesh; faces are node sets xmin, xmax, ymin, ymax, zmin, zmax."""
    if min(nx, ny, nz) < 1:
        raise MeshFileError('box mesh needs at least one element per direction')
    axes = [np.linspace(o, o + length, n + 1) for o, length, n in zip(origin, lengths, (nx, ny, nz))]
    gz, gy, gx = np.meshgrid(axes[2], axes[1], axes[0], indexing='ij')
    coords = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def node(i, j, k):
        return (k * (ny + 1) + j) * (nx + 1) + i

    connectivity = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                connectivity.append([
                    node(i, j, k), node(i + 1, j, k), node(i + 1, j + 1, k), node(i, j + 1, k),
                    node(i, j, k + 1), node(i + 1, j, k + 1), node(i + 1, j + 1, k + 1), node(i, j + 1, k + 1),
                ])
    tol = 1e-12 * max(lengths)
    node_sets = {'all': np.arange(len(coords))}
    for axis, label in enumerate('xyz'):
        node_sets[f'{label}min'] = np.flatnonzero(np.abs(coords[:, axis] - axes[axis][0]) <= tol)
        node_sets[f'{label}max'] = np.flatnonzero(np.abs(coords[:, axis] - axes[axis][-1]) <= tol)
    n_elements = len(connectivity)
    return Mesh(
        node_ids=np.arange(1, len(coords) + 1),
        coords=coords,
        element_ids=np.arange(1, n_elements + 1),
        connectivity=np.array(connectivity),
        node_sets=node_sets,
        element_sets={'all': np.arange(n_elements)},
    )


def _numbers(fields, line_no: int, kind=float):
    try:
        return [kind(v) for v in fields]
    except ValueError as e:
        raise MeshFileError(f'malformed record: {e}', line=line_no) from e


def load_mesh(path: Union[str, Path]) -> Mesh:
    path = Path(path)
    if not path.is_file():
        raise MeshFileError(f'{path}: no such mesh file')

    nodes: Dict[int, list] = {}
    elements: Dict[int, list] = {}
    nsets: Dict[str, list] = {}
    elsets: Dict[str, list] = {}
    for line_no, raw in enumerate(path.read_text(encoding='utf-8').splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        keyword, *rest = line.split()
        keyword = keyword.lower()
        if keyword == 'node':
            if len(rest) != 4:
                raise MeshFileError('node record needs an id and 3 coordinates', line=line_no)
            node_id = _numbers(rest[:1], line_no, int)[0]
            if node_id in nodes:
                raise MeshFileError(f'duplicate node id {node_id}', line=line_no)
            nodes[node_id] = _numbers(rest[1:], line_no)
        elif keyword == 'hex':
            if len(rest) != 9:
                raise MeshFileError('hex record needs an id and 8 node ids', line=line_no)
            ids = _numbers(rest, line_no, int)
            if ids[0] in elements:
                raise MeshFileError(f'duplicate element id {ids[0]}', line=line_no)
            elements[ids[0]] = ids[1:] + [line_no]
        elif keyword in ('nset', 'elset'):
            if not rest:
                raise MeshFileError(f'{keyword} record needs a name', line=line_no)
            target = nsets if keyword == 'nset' else elsets
            target.setdefault(rest[0], []).extend(_numbers(rest[1:], line_no, int))
        else:
            raise MeshFileError(f"unknown record '{keyword}'", line=line_no)

    if not elements:
        raise MeshFileError(f'{path}: mesh has no hex elements')
    node_ids = np.array(sorted(nodes))
    index = {nid: k for k, nid in enumerate(node_ids)}
    connectivity = []
    for eid in sorted(elements):
        *conn, line_no = elements[eid]
        missing = [n for n in conn if n not in index]
        if missing:
            raise MeshFileError(f'element {eid} refers to unknown nodes {missing}', line=line_no)
        connectivity.append([index[n] for n in conn])
    element_ids = np.array(sorted(elements))
    element_index = {eid: k for k, eid in enumerate(element_ids)}

    def resolve(members, lookup, what, name):
        unknown = [m for m in members if m not in lookup]
        if unknown:
            raise MeshFileError(f'{what} set {name} refers to unknown ids {unknown[:5]}')
        return np.array(sorted({lookup[m] for m in members}), dtype=int)

    mesh = Mesh(
        node_ids=node_ids,
        coords=np.array([nodes[n] for n in node_ids]),
        element_ids=element_ids,
        connectivity=np.array(connectivity),
        node_sets={'all': np.arange(len(node_ids)), **{k: resolve(v, index, 'node', k) for k, v in nsets.items()}},
        element_sets={'all': np.arange(len(element_ids)), **{k: resolve(v, element_index, 'element', k) for k, v in elsets.items()}},
    )
    for e in range(mesh.n_elements):
        try:
            element_kinematics(mesh.element_coords(e))
        except MeshFileError as err:
            raise MeshFileError(f'element {mesh.element_ids[e]}: {err}') from err
    logger.info(f'Loaded {mesh} from {path}')
    return mesh
