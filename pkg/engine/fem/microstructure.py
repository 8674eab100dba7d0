"""
Per-element microstructure fields: fiber orientation tensor and volume fraction.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from config.exceptions import InvalidOrientationError, MicrostructureFileError
from transfer.orientation import COMPONENT_NAMES, OrientationTensor

from .mesh import Mesh

logger = logging.getLogger(__name__)

FIELD_COLUMNS = list(COMPONENT_NAMES) + ['vf']
TRACE_RENORMALIZE_TOL = 1e-3


@dataclass
class MicrostructureField:
    """One (orientation, vf) pair per mesh element, in mesh element order."""
    orientations: List[OrientationTensor]
    vf: np.ndarray

    def __len__(self):
        return len(self.orientations)

    def __getitem__(self, e: int) -> Tuple[OrientationTensor, float]:
        return self.orientations[e], float(self.vf[e])

    def keys(self) -> List[Tuple]:
        """Hashable per-element keys; equal keys share one network."""
        return [(a.key(), round(float(v), 12)) for a, v in zip(self.orientations, self.vf)]

    @classmethod
    def uniform(cls, n_elements: int, a: OrientationTensor, vf: float) -> 'MicrostructureField':
        return cls([a] * n_elements, np.full(n_elements, float(vf)))


def _data_line_numbers(path: Path) -> List[int]:
    lines = path.read_text(encoding='utf-8').splitlines()
    return [n for n, line in enumerate(lines, start=1) if line.strip() and not line.lstrip().startswith('#')]


def _row_to_entry(row: pd.Series, line: int) -> Tuple[OrientationTensor, float]:
    values = pd.to_numeric(row[FIELD_COLUMNS], errors='coerce')
    bad = [name for name, v in values.items() if not np.isfinite(v)]
    if bad:
        raise MicrostructureFileError(f'non-numeric values in columns {bad}', line=line)
    vf = float(values['vf'])
    if not 0.0 < vf < 1.0:
        raise MicrostructureFileError(f'fiber volume fraction {vf} outside (0, 1)', line=line)
    try:
        a = OrientationTensor.from_components(*(float(values[c]) for c in COMPONENT_NAMES))
    except InvalidOrientationError as e:
        raise MicrostructureFileError(str(e), line=line) from e
    if abs(a.trace - 1.0) > TRACE_RENORMALIZE_TOL:
        raise MicrostructureFileError(f'orientation trace {a.trace:.6f} is not 1', line=line)
    return a.normalized(), vf


def load_microstructure_field(path: Union[str, Path], mesh: Mesh) -> MicrostructureField:
    """
    Read `elem,axx,ayy,azz,axy,ayz,azx,vf` rows for a mesh.

    With an `elem` column rows are matched by element id, otherwise the row
    count must equal the element count and rows follow element order.
    Traces within 1e-3 of one are renormalized.
    """
    path = Path(path)
    if not path.is_file():
        raise MicrostructureFileError(f'{path}: no such microstructure file')
    try:
        frame = pd.read_csv(path, comment='#', dtype=str, skipinitialspace=True)
    except pd.errors.ParserError as e:
        raise MicrostructureFileError(f'{path}: {e}') from e
    missing = [c for c in FIELD_COLUMNS if c not in frame.columns]
    if missing:
        raise MicrostructureFileError(f'{path}: missing columns {missing}')
    lines = _data_line_numbers(path)[1:]

    entries: Dict[int, Tuple[OrientationTensor, float]] = {}
    if 'elem' in frame.columns:
        known = {int(eid): k for k, eid in enumerate(mesh.element_ids)}
        for i, row in frame.iterrows():
            try:
                eid = int(row['elem'])
            except (TypeError, ValueError):
                raise MicrostructureFileError(f"invalid element id '{row['elem']}'", line=lines[i])
            if eid not in known:
                raise MicrostructureFileError(f'element {eid} is not in the mesh', line=lines[i])
            entries[known[eid]] = _row_to_entry(row, lines[i])
        absent = [int(mesh.element_ids[k]) for k in range(mesh.n_elements) if k not in entries]
        if absent:
            raise MicrostructureFileError(f'{path}: no microstructure for elements {absent[:5]}')
    else:
        if len(frame) != mesh.n_elements:
            raise MicrostructureFileError(
                f'{path}: {len(frame)} rows for {mesh.n_elements} elements and no elem column'
            )
        for i, row in frame.iterrows():
            entries[i] = _row_to_entry(row, lines[i])

    orientations = [entries[k][0] for k in range(mesh.n_elements)]
    vf = np.array([entries[k][1] for k in range(mesh.n_elements)])
    field = MicrostructureField(orientations, vf)
    logger.info(f'Loaded microstructure for {len(field)} elements ({len(set(field.keys()))} distinct) from {path}')
    return field
