"""
Shared plumbing for engine management commands: thread caps, error mapping and run manifests.
"""
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Union

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError, CommandParser
from django.db import DatabaseError
from django.utils import timezone
from threadpoolctl import threadpool_limits

from config.command_logging import log_command_run
from config.exceptions import DMNError

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


class EngineCommandParser(CommandParser):
    """Usage errors exit with status 1 instead of argparse's 2."""

    def error(self, message):
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(1, f'{self.prog}: error: {message}\n')
        raise CommandError(f'Error: {message}', returncode=1)


def file_hash(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with Path(path).open('rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def options_hash(options: dict) -> str:
    payload = json.dumps(options, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


class RunRecorder:
    """Collects what a run read, wrote and seeded, then persists the manifest."""

    def __init__(self, command: str, options: dict):
        self.command = command
        self.options = {k: v for k, v in options.items() if k not in ('stdout', 'stderr') and v is not None}
        self.config_hash = options_hash(self.options)
        self.input_hashes: Dict[str, str] = {}
        self.seeds: Dict[str, int] = {}
        self.outputs: List[str] = []
        self.output_dir: Optional[Path] = None
        self.started_at = timezone.now()

    def add_input(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        if path.is_file():
            self.input_hashes[str(path)] = file_hash(path)
        elif path.is_dir():
            for child in sorted(path.iterdir()):
                if child.is_file():
                    self.input_hashes[str(child)] = file_hash(child)
        return path

    def add_output(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.outputs.append(str(path))
        if self.output_dir is None:
            self.output_dir = path if path.is_dir() else path.parent
        return path

    def add_seed(self, name: str, value: int):
        self.seeds[name] = int(value)

    def finish(self, exit_status: int, wall_time: float) -> Optional[Path]:
        from .models import RunManifest

        manifest = RunManifest(
            command=self.command,
            config_hash=self.config_hash,
            options=json.loads(json.dumps(self.options, default=str)),
            input_hashes=self.input_hashes,
            seeds=self.seeds,
            outputs=self.outputs,
            exit_status=exit_status,
            wall_time=wall_time,
            started_at=self.started_at,
            finished_at=timezone.now(),
        )
        try:
            manifest.save()
        except DatabaseError as e:
            logger.info(f'Run manifest not stored in the database: {e}')

        target_dir = self.output_dir or Path(getattr(settings, 'DMN_OUTPUT_DIR', 'runs'))
        target_dir.mkdir(parents=True, exist_ok=True)
        target = target_dir / MANIFEST_NAME
        target.write_text(json.dumps(manifest.as_dict(), indent=2), encoding='utf-8')
        logger.debug(f'Wrote run manifest to {target}')
        return target


class DMNCommand(BaseCommand):
    """
    Base class of all engine commands.

    Subclasses implement add_command_arguments() and run(); engine errors are
    turned into CommandError carrying exit status 1 (input) or 2 (numerical).
    """

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.__class__ = EngineCommandParser
        return parser

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    def add_arguments(self, parser):
        parser.add_argument(
            '--threads',
            type=int,
            default=None,
            help='Cap on BLAS and worker threads (default: DMN_THREADS)',
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run(self, threads: int, **options):
        raise NotImplementedError

    def handle(self, *args, **options):
        threads = options.get('threads') or getattr(settings, 'DMN_THREADS', 1)
        if threads < 1:
            raise CommandError('--threads must be at least 1', returncode=1)
        self.recorder = RunRecorder(self.command_name, options)
        record = {'exit_status': 1, 'wall_time': 0.0}
        try:
            with log_command_run(self.command_name, options) as record, threadpool_limits(limits=threads):
                try:
                    self.run(threads=threads, **{k: v for k, v in options.items() if k != 'threads'})
                except DMNError as e:
                    raise CommandError(str(e), returncode=e.exit_status) from e
        finally:
            self.recorder.finish(record['exit_status'], record['wall_time'])

    def success(self, message: str):
        self.stdout.write(self.style.SUCCESS(message))


def read_json(path: Union[str, Path], what: str = 'input') -> dict:
    path = Path(path)
    if not path.is_file():
        raise CommandError(f'{path}: no such {what} file', returncode=1)
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise CommandError(f'{path}: invalid JSON in {what} file ({e.msg} at line {e.lineno})', returncode=1)
