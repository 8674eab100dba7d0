"""
Django management command to build an anchor bundle from trained anchor networks.
"""
from pathlib import Path

from storage.commands import DMNCommand
from transfer.bundles import load_anchors, save_anchor_bundle
from transfer.regression import fit_anchor_regression


class Command(DMNCommand):
    help = 'Fit the descriptor regression over trained anchors and write an anchor bundle'

    def add_command_arguments(self, parser):
        parser.add_argument('--anchors', required=True, help='Directory with anchors.json and trained networks')
        parser.add_argument('--out', required=True, help='Bundle directory')

    def run(self, threads, **options):
        anchors = load_anchors(self.recorder.add_input(options['anchors']))
        anchor_set = fit_anchor_regression(anchors)
        out = Path(options['out'])
        save_anchor_bundle(anchor_set, out)
        self.recorder.add_output(out)
        if anchor_set.wide_angles:
            self.stdout.write(self.style.WARNING(
                f'{len(anchor_set.wide_angles)} angles vary by more than pi/2 across anchors'
            ))
        self.success(f'Anchor bundle with {len(anchors)} anchors written to {out}')
