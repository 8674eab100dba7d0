"""
Django management command to run the four-stage anchor training chain.
"""
from pathlib import Path

from storage.commands import DMNCommand, read_json
from storage.networks import save_network
from storage.tables import load_dataset
from training.optimizer import transfer_train_chain
from training.serializers import parse_train_config
from transfer.bundles import ANCHORS_FILE, read_manifest, write_manifest


class Command(DMNCommand):
    help = 'Train the anchor networks in sequence, each stage starting from the previous one'

    def add_command_arguments(self, parser):
        parser.add_argument('--anchors', required=True, help='Directory holding anchors.json and the datasets')
        parser.add_argument('--config', help='Training configuration JSON shared by all stages')
        parser.add_argument('--epochs', type=int, help='Override the configured epoch count')

    def run(self, threads, **options):
        directory = Path(options['anchors'])
        manifest = read_manifest(self.recorder.add_input(directory / ANCHORS_FILE))
        payload = read_json(options['config'], 'training config') if options.get('config') else {}
        if options.get('epochs') is not None:
            payload['epochs'] = options['epochs']
        if 'n_layers' in manifest and 'n_layers' not in payload:
            payload['n_layers'] = manifest['n_layers']
        cfg = parse_train_config(payload)
        self.recorder.config_hash = cfg.fingerprint()
        self.recorder.add_seed('seed', cfg.seed)

        stages = []
        for entry in manifest['anchors']:
            dataset_path = self.recorder.add_input(directory / entry.get('dataset', f"{entry['name']}.csv"))
            stages.append((load_dataset(dataset_path), cfg))
        networks = transfer_train_chain(stages)

        entries = []
        for entry, net in zip(manifest['anchors'], networks):
            filename = f"{entry['name']}.net.json"
            self.recorder.add_output(save_network(net, directory / filename))
            entries.append({**entry, 'network': filename})
            self.stdout.write(f"{entry['name']}: {net}")
        write_manifest(directory / ANCHORS_FILE, 'dmn-anchors', entries, n_layers=networks[0].n_layers)
        self.success(f'Trained {len(networks)} anchor networks in {directory}')
