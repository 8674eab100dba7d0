"""
Network parameter files (JSON).
"""
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from config.exceptions import NetworkFileError, TopologyError
from mechanics.mandel import EULER_CONVENTION
from network.topology import Network

logger = logging.getLogger(__name__)

NETWORK_FORMAT = 'dmn-network'
NETWORK_VERSION = 1
REQUIRED_FIELDS = ('format', 'version', 'n_layers', 'z', 'angles')


def network_to_dict(net: Network) -> dict:
    return {
        'format': NETWORK_FORMAT,
        'version': NETWORK_VERSION,
        'euler_convention': EULER_CONVENTION,
        'n_layers': net.n_layers,
        'z': [float(v) for v in net.z],
        'angles': [float(v) for v in net.angles.ravel()],
        'provenance': net.provenance,
    }


def network_from_dict(data: dict, source: str = '<memory>') -> Network:
    if not isinstance(data, dict):
        raise NetworkFileError(f'{source}: network file must hold a JSON object')
    for name in REQUIRED_FIELDS:
        if name not in data:
            raise NetworkFileError(f"{source}: missing field '{name}'")
    if data['format'] != NETWORK_FORMAT:
        raise NetworkFileError(f"{source}: unknown format '{data['format']}'")
    if data['version'] != NETWORK_VERSION:
        raise NetworkFileError(
            f"{source}: unsupported version {data['version']} (expected {NETWORK_VERSION})"
        )
    convention = data.get('euler_convention', EULER_CONVENTION)
    if convention != EULER_CONVENTION:
        raise NetworkFileError(f"{source}: unsupported Euler convention '{convention}'")

    n_layers = data['n_layers']
    if not isinstance(n_layers, int) or n_layers < 1:
        raise NetworkFileError(f'{source}: n_layers must be a positive integer')
    z = np.asarray(data['z'], dtype=float)
    angles = np.asarray(data['angles'], dtype=float)
    if z.shape != (2 ** (n_layers - 1),):
        raise NetworkFileError(
            f"{source}: field 'z' has {z.size} entries, expected {2 ** (n_layers - 1)}"
        )
    if angles.shape != (3 * (2 ** n_layers - 1),):
        raise NetworkFileError(
            f"{source}: field 'angles' has {angles.size} entries, expected {3 * (2 ** n_layers - 1)}"
        )
    try:
        return Network(n_layers, z, angles.reshape(-1, 3), dict(data.get('provenance') or {}))
    except TopologyError as e:
        raise NetworkFileError(f'{source}: {e}') from e


def save_network(net: Network, path: Union[str, Path]) -> Path:
    """Write a network file; floats keep full round-trip precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(network_to_dict(net), indent=2), encoding='utf-8')
    logger.debug(f'Saved {net} to {path}')
    return path


def load_network(path: Union[str, Path]) -> Network:
    path = Path(path)
    if not path.is_file():
        raise NetworkFileError(f'{path}: no such network file')
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise NetworkFileError(f'{path}: not valid JSON ({e.msg} at line {e.lineno})') from e
    net = network_from_dict(data, str(path))
    logger.debug(f'Loaded {net} from {path}')
    return net
