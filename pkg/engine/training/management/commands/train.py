"""
Django management command to train one network on a dataset.
"""
from pathlib import Path

from network.topology import build_network
from storage.commands import DMNCommand, read_json
from storage.networks import load_network, save_network
from storage.tables import load_dataset, write_history
from training.optimizer import plot_history, train
from training.serializers import parse_train_config


class Command(DMNCommand):
    help = 'Train a deep material network on a linear-elastic dataset'

    def add_command_arguments(self, parser):
        parser.add_argument('--data', required=True, help='Dataset CSV')
        parser.add_argument('--init', default='random', help="'random' or a network file to start from")
        parser.add_argument('--config', help='Training configuration JSON')
        parser.add_argument('--out', required=True, help='Output network file')
        parser.add_argument('--history', help='Error history CSV (default: next to --out)')
        parser.add_argument('--plot', help='Write an error history plot to this PNG file')
        parser.add_argument('--epochs', type=int, help='Override the configured epoch count')

    def run(self, threads, **options):
        payload = read_json(options['config'], 'training config') if options.get('config') else {}
        if options.get('epochs') is not None:
            payload['epochs'] = options['epochs']
        cfg = parse_train_config(payload)
        self.recorder.config_hash = cfg.fingerprint()
        self.recorder.add_seed('seed', cfg.seed)

        dataset = load_dataset(self.recorder.add_input(options['data']))
        if options['init'] == 'random':
            init = build_network(cfg.n_layers, cfg.seed)
        else:
            init = load_network(self.recorder.add_input(options['init']))

        result = train(init, dataset, cfg)
        out = Path(options['out'])
        self.recorder.add_output(save_network(result.network, out))
        history_path = Path(options.get('history') or out.with_suffix('.history.csv'))
        self.recorder.add_output(write_history(result.history, history_path))
        if options.get('plot'):
            self.recorder.add_output(plot_history(result.history, Path(options['plot'])))

        summary = result.summary()
        self.success(
            f"Trained {result.network}: train error {summary['train_error']:.4e}, "
            f"test error {summary['test_error']:.4e}"
        )
