"""
CSV tables: training datasets, strain paths and result histories.
"""
import io
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from config.exceptions import ConfigurationError
from mechanics.mandel import mandel_from_engineering_strain
from training.datasets import Batch, Dataset

logger = logging.getLogger(__name__)

DATASET_FORMAT = 'dmn-dataset'
DATASET_VERSION = 1
UPPER = [(i, j) for i in range(6) for j in range(i, 6)]
PATH_COLUMNS = ['e11', 'e22', 'e33', 'g12', 'g23', 'g31']


def _stiffness_columns(prefix: str) -> List[str]:
    return [f'{prefix}{i + 1}{j + 1}' for i, j in UPPER]


FIBER_COLUMNS = _stiffness_columns('f')
MATRIX_COLUMNS = _stiffness_columns('m')
COMPOSITE_COLUMNS = _stiffness_columns('c')


def _upper(c: np.ndarray) -> np.ndarray:
    rows, cols = zip(*UPPER)
    return c[:, list(rows), list(cols)]


def _full(values: np.ndarray) -> np.ndarray:
    c = np.zeros((len(values), 6, 6))
    for k, (i, j) in enumerate(UPPER):
        c[:, i, j] = values[:, k]
        c[:, j, i] = values[:, k]
    return c


def _header_lines(text: str) -> Tuple[Dict[str, str], str]:
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith('#'):
            key, _, value = line[1:].partition(':')
            header[key.strip()] = value.strip()
        else:
            body.append(line)
    return header, '\n'.join(body)


def _batch_frame(batch: Batch, split: str) -> pd.DataFrame:
    frame = pd.DataFrame(
        np.hstack([_upper(batch.fiber), _upper(batch.matrix), _upper(batch.composite)]),
        columns=FIBER_COLUMNS + MATRIX_COLUMNS + COMPOSITE_COLUMNS,
    )
    frame.insert(0, 'split', split)
    return frame


def save_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    """
    Write a dataset as CSV with '#' header lines.

    Rows hold the 21 upper-triangle Mandel entries of the fiber, matrix and
    composite stiffnesses (MPa).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        'format': DATASET_FORMAT,
        'version': str(DATASET_VERSION),
        'notation': 'mandel',
        'order': '11,22,33,12,23,31',
        'name': dataset.name,
        'teacher': dataset.teacher_hash or '',
        'descriptor': ','.join(repr(float(v)) for v in dataset.descriptor) if dataset.descriptor else '',
    }
    frame = pd.concat([_batch_frame(dataset.train, 'train'), _batch_frame(dataset.test, 'test')], ignore_index=True)
    with path.open('w', encoding='utf-8', newline='') as fh:
        for key, value in header.items():
            fh.write(f'# {key}: {value}\n')
        frame.to_csv(fh, index=False, float_format='%.17g')
    logger.debug(f'Saved {dataset} to {path}')
    return path


def load_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f'{path}: no such dataset file')
    header, body = _header_lines(path.read_text(encoding='utf-8'))
    if header.get('format') != DATASET_FORMAT:
        raise ConfigurationError(f'{path}: not a dataset file')
    if header.get('version') != str(DATASET_VERSION):
        raise ConfigurationError(f"{path}: unsupported dataset version {header.get('version')}")
    frame = pd.read_csv(io.StringIO(body), float_precision='round_trip')
    missing = [c for c in ['split'] + FIBER_COLUMNS + MATRIX_COLUMNS + COMPOSITE_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigurationError(f'{path}: missing columns {missing[:3]}')

    def batch(split: str) -> Batch:
        part = frame[frame['split'] == split]
        return Batch(
            _full(part[FIBER_COLUMNS].to_numpy(dtype=float)),
            _full(part[MATRIX_COLUMNS].to_numpy(dtype=float)),
            _full(part[COMPOSITE_COLUMNS].to_numpy(dtype=float)),
        )

    descriptor = tuple(float(v) for v in header['descriptor'].split(',')) if header.get('descriptor') else None
    dataset = Dataset(
        train=batch('train'),
        test=batch('test'),
        teacher_hash=header.get('teacher') or None,
        descriptor=descriptor,
        name=header.get('name', path.stem),
    )
    if len(dataset.train) == 0:
        raise ConfigurationError(f'{path}: dataset has no training rows')
    logger.debug(f'Loaded {dataset} from {path}')
    return dataset


def load_strain_path(path: Union[str, Path], cumulative: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a loading path CSV of macroscopic strain increments.

    Columns e11, e22, e33, g12, g23, g31 (engineering shears), one row per
    step, with an optional 'step' column. With cumulative=True rows hold the
    total strain reached at each step instead. Returns (steps, Mandel increments).
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f'{path}: no such loading path file')
    frame = pd.read_csv(path, comment='#')
    missing = [c for c in PATH_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigurationError(f'{path}: missing columns {missing}')
    if frame.empty:
        raise ConfigurationError(f'{path}: loading path has no rows')
    rows = mandel_from_engineering_strain(frame[PATH_COLUMNS].to_numpy(dtype=float))
    if not np.all(np.isfinite(rows)):
        raise ConfigurationError(f'{path}: non-numeric strain entries')
    increments = np.diff(np.vstack([np.zeros(6), rows]), axis=0) if cumulative else rows
    steps = frame['step'].to_numpy() if 'step' in frame.columns else np.arange(1, len(frame) + 1)
    return steps, increments


def write_history(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g')
    logger.debug(f'Wrote {len(frame)} rows to {path}')
    return path
