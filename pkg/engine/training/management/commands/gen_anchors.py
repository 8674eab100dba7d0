"""
Django management command to generate anchor training datasets.
"""
from pathlib import Path

import numpy as np

from network.topology import build_network
from storage.commands import DMNCommand
from storage.networks import save_network
from storage.tables import save_dataset
from training.datasets import generate_teacher_dataset, perturbed_teacher
from transfer.bundles import ANCHORS_FILE, write_manifest
from transfer.regression import ANCHOR_DESCRIPTORS, ANCHOR_NAMES


class Command(DMNCommand):
    help = 'Generate teacher networks and linear-elastic datasets for the four anchor microstructures'

    def add_command_arguments(self, parser):
        parser.add_argument('--teacher-seed', type=int, required=True, help='Seed of the base teacher network')
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--n-samples', type=int, default=500, help='Samples per anchor (80%% train)')
        parser.add_argument('--n-layers', type=int, default=8, help='Teacher network depth')
        parser.add_argument('--perturbation', type=float, default=0.05, help='Teacher spread between anchors')

    def run(self, threads, **options):
        out = Path(options['out'])
        seed = options['teacher_seed']
        self.recorder.add_seed('teacher_seed', seed)
        base = build_network(options['n_layers'], seed)
        rng = np.random.default_rng(seed)

        entries = []
        for name, descriptor in zip(ANCHOR_NAMES, ANCHOR_DESCRIPTORS):
            teacher = perturbed_teacher(base, rng, options['perturbation'])
            dataset = generate_teacher_dataset(
                teacher, options['n_samples'], rng, descriptor=tuple(descriptor.as_array()), name=name,
            )
            save_network(teacher, out / f'{name}.teacher.json')
            self.recorder.add_output(save_dataset(dataset, out / f'{name}.csv'))
            entries.append({
                'name': name,
                'vf': descriptor.vf,
                'a11': descriptor.a11,
                'a22': descriptor.a22,
                'dataset': f'{name}.csv',
                'teacher': f'{name}.teacher.json',
            })
            self.stdout.write(f'{name}: {dataset}')
        write_manifest(out / ANCHORS_FILE, 'dmn-anchors', entries, n_layers=options['n_layers'])
        self.success(f'Anchor datasets written to {out}')
