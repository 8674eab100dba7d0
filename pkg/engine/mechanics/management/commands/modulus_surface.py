"""
Django management command to sample the directional Young's modulus of a network.
"""
from pathlib import Path

from materials.serializers import build_materials
from mechanics.surface import modulus_surface_frame, plot_modulus_surface
from network.forward import forward_stiffness
from storage.commands import DMNCommand, read_json
from storage.networks import load_network
from storage.tables import write_history


class Command(DMNCommand):
    help = "Write the Young's modulus surface of a network's homogenized stiffness"

    def add_command_arguments(self, parser):
        parser.add_argument('--net', required=True, help='Network file')
        parser.add_argument('--phases', required=True, help='Materials JSON giving the phase elastic constants')
        parser.add_argument('--out', required=True, help='Output CSV (nx, ny, nz, E_MPa)')
        parser.add_argument('--n-theta', type=int, default=37)
        parser.add_argument('--n-phi', type=int, default=72)
        parser.add_argument('--plot', help='Also render the surface to this PNG file')

    def run(self, threads, **options):
        net = load_network(self.recorder.add_input(options['net']))
        fiber, matrix = build_materials(read_json(self.recorder.add_input(options['phases']), 'phases'))
        c = forward_stiffness(net, fiber.stiffness, matrix.stiffness)
        frame = modulus_surface_frame(c, options['n_theta'], options['n_phi'])
        out = self.recorder.add_output(write_history(frame, Path(options['out'])))
        if options.get('plot'):
            self.recorder.add_output(plot_modulus_surface(frame, options['n_theta'], options['n_phi'], Path(options['plot'])))
        self.success(
            f"E ranges from {frame['E_MPa'].min():.1f} to {frame['E_MPa'].max():.1f} MPa; written to {out}"
        )
