"""
Django management command to run a single material point along a strain path.
"""
from pathlib import Path

from django.core.management.base import CommandError

from config.exceptions import InvalidOrientationError
from materials.serializers import build_materials
from online.driver import run_point_simulation
from storage.commands import DMNCommand, read_json
from storage.networks import load_network
from storage.tables import load_strain_path, write_history
from transfer.bundles import load_anchor_bundle
from transfer.orientation import OrientationTensor
from transfer.regression import instantiate_network


def parse_orientation(text: str) -> OrientationTensor:
    """'axx,ayy,azz,axy,ayz,azx' to an orientation tensor."""
    try:
        values = [float(v) for v in text.split(',')]
    except ValueError:
        raise InvalidOrientationError(f"orientation '{text}' must hold 6 comma separated numbers")
    if len(values) != 6:
        raise InvalidOrientationError(f'orientation needs 6 components, got {len(values)}')
    return OrientationTensor.from_components(*values)


class Command(DMNCommand):
    help = 'Drive one network-backed material point through a strain path'

    def add_command_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--bundle', help='Anchor bundle directory')
        source.add_argument('--net', help='Network file used as is')
        parser.add_argument('--orientation', help='axx,ayy,azz,axy,ayz,azx (with --bundle)')
        parser.add_argument('--vf', type=float, help='Fiber volume fraction (with --bundle)')
        parser.add_argument('--path', required=True, help='Loading path CSV of strain increments per step')
        parser.add_argument(
            '--cumulative', action='store_true', help='Path rows hold total strains instead of increments',
        )
        parser.add_argument('--materials', help='Materials JSON (fiber and matrix blocks or a preset)')
        parser.add_argument('--preset', default='rve', help='Materials preset when --materials is not given')
        parser.add_argument('--tol', type=float, help='Fixed-point tolerance (default: DMN_ONLINE_TOL)')
        parser.add_argument('--max-iter', type=int, help='Iteration cap (default: DMN_ONLINE_MAX_ITER)')
        parser.add_argument('--out', required=True, help='Output stress history CSV')

    def run(self, threads, **options):
        if options.get('bundle'):
            if options.get('orientation') is None or options.get('vf') is None:
                raise CommandError('--bundle needs --orientation and --vf', returncode=1)
            anchor_set = load_anchor_bundle(self.recorder.add_input(options['bundle']))
            network = instantiate_network(anchor_set, parse_orientation(options['orientation']), options['vf'])
        else:
            network = load_network(self.recorder.add_input(options['net']))

        if options.get('materials'):
            payload = read_json(self.recorder.add_input(options['materials']), 'materials')
        else:
            payload = {'preset': options['preset']}
        fiber, matrix = build_materials(payload)

        steps, increments = load_strain_path(
            self.recorder.add_input(options['path']), cumulative=options.get('cumulative', False),
        )
        history = run_point_simulation(
            network, fiber, matrix, increments, steps=steps, tol=options.get('tol'), max_iter=options.get('max_iter'),
        )
        out = self.recorder.add_output(write_history(history, Path(options['out'])))
        self.success(f'{len(history)} steps written to {out}')
