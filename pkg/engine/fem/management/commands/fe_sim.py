"""
Django management command to run an explicit FE simulation with per-point networks.
"""
from pathlib import Path

import numpy as np
import pandas as pd

from fem.mesh import load_mesh
from fem.microstructure import load_microstructure_field
from fem.serializers import parse_scenario
from fem.solver import bind_quadrature_points, instantiate_element_networks, run_simulation, stress_field
from materials.serializers import build_materials
from storage.commands import DMNCommand, read_json
from storage.tables import write_history
from transfer.bundles import load_anchor_bundle


class Command(DMNCommand):
    help = 'Run an explicit dynamics simulation on a hex8 mesh'

    def add_command_arguments(self, parser):
        parser.add_argument('--bundle', required=True, help='Anchor bundle directory')
        parser.add_argument('--mesh', required=True, help='Mesh file')
        parser.add_argument('--micro', required=True, help='Microstructure field CSV')
        parser.add_argument('--scenario', required=True, help='Scenario JSON')
        parser.add_argument('--out', required=True, help='Output directory')

    def run(self, threads, **options):
        scenario = parse_scenario(read_json(self.recorder.add_input(options['scenario']), 'scenario'))
        config = scenario.to_config()
        fiber, matrix = build_materials(scenario.validated_data.get('materials') or {'preset': 'structural'})

        mesh = load_mesh(self.recorder.add_input(options['mesh']))
        field = load_microstructure_field(self.recorder.add_input(options['micro']), mesh)
        anchor_set = load_anchor_bundle(self.recorder.add_input(options['bundle']))
        networks = instantiate_element_networks(field, anchor_set)
        bindings = bind_quadrature_points(mesh, networks, fiber, matrix, vf=field.vf)

        result = run_simulation(mesh, bindings, fiber, matrix, config, threads=threads)

        out = Path(options['out'])
        self.recorder.add_output(write_history(result.history, out / 'history.csv'))
        for step, time, u, stresses in result.snapshots:
            displacement = pd.DataFrame(u.reshape(-1, 3), columns=['ux', 'uy', 'uz'])
            displacement.insert(0, 'node', mesh.node_ids)
            self.recorder.add_output(write_history(displacement, out / f'displacement_{step:06d}.csv'))
            self.recorder.add_output(write_history(stresses, out / f'field_{step:06d}.csv'))
        final = result.state
        self.recorder.add_output(write_history(stress_field(bindings, mesh, final.states), out / 'field_final.csv'))
        self.success(
            f'Reached t={final.time:.4e} s in {final.step} steps, '
            f'max |u| {np.abs(final.u).max() if final.u.size else 0.0:.4e} mm; outputs in {out}'
        )
