"""
Anchor bundles: four anchor networks plus a descriptor manifest in one directory.
"""
import json
import logging
from pathlib import Path
from typing import List, Union

from config.exceptions import ConfigurationError
from network.topology import Network
from storage.networks import load_network, save_network

from .orientation import Descriptor
from .regression import Anchor, AnchorSet, fit_anchor_regression
from .serializers import AnchorManifestSerializer

logger = logging.getLogger(__name__)

BUNDLE_FILE = 'bundle.json'
ANCHORS_FILE = 'anchors.json'


def read_manifest(path: Union[str, Path]) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f'{path}: no such anchor manifest')
    try:
        payload = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f'{path}: not valid JSON ({e.msg} at line {e.lineno})') from e
    serializer = AnchorManifestSerializer(data=payload)
    if not serializer.is_valid():
        raise ConfigurationError(f'{path}: {serializer.errors}')
    return serializer.validated_data


def write_manifest(path: Union[str, Path], fmt: str, entries: List[dict], **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {'format': fmt, 'version': 1, **extra, 'anchors': entries}
    path.write_text(json.dumps(payload, indent=2), encoding='utf-8')
    return path


def network_path(directory: Path, entry: dict) -> Path:
    return directory / entry.get('network', f"{entry['name']}.net.json")


def load_anchors(directory: Union[str, Path]) -> List[Anchor]:
    """Anchors listed in a directory's anchors.json, with their trained networks."""
    directory = Path(directory)
    manifest = read_manifest(directory / ANCHORS_FILE)
    anchors = []
    for entry in manifest['anchors']:
        net = load_network(network_path(directory, entry))
        anchors.append(Anchor(Descriptor(entry['vf'], entry['a11'], entry['a22']), net, entry['name']))
    return anchors


def save_anchor_bundle(anchor_set: AnchorSet, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, anchor in enumerate(anchor_set.anchors):
        name = anchor.name or f'anchor{k}'
        filename = f'{name}.net.json'
        save_network(anchor.network, directory / filename)
        d = anchor.descriptor
        entries.append({'name': name, 'vf': d.vf, 'a11': d.a11, 'a22': d.a22, 'network': filename})
    path = write_manifest(
        directory / BUNDLE_FILE,
        'dmn-anchor-bundle',
        entries,
        n_layers=anchor_set.n_layers,
        coefficients=anchor_set.coefficients.tolist(),
    )
    logger.info(f'Saved anchor bundle with {len(entries)} anchors to {directory}')
    return path


def load_anchor_bundle(directory: Union[str, Path]) -> AnchorSet:
    directory = Path(directory)
    manifest = read_manifest(directory / BUNDLE_FILE)
    if manifest['format'] != 'dmn-anchor-bundle':
        raise ConfigurationError(f'{directory}: {BUNDLE_FILE} is not an anchor bundle')
    anchors = []
    for entry in manifest['anchors']:
        net: Network = load_network(network_path(directory, entry))
        anchors.append(Anchor(Descriptor(entry['vf'], entry['a11'], entry['a22']), net, entry['name']))
    if 'n_layers' in manifest and any(a.network.n_layers != manifest['n_layers'] for a in anchors):
        raise ConfigurationError(f'{directory}: network depth differs from bundle n_layers')
    return fit_anchor_regression(anchors)
