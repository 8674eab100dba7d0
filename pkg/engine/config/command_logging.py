"""
Logging of management command runs.
"""
import logging
import time
from contextlib import contextmanager

logger = logging.getLogger(__name__)


@contextmanager
def log_command_run(command: str, options: dict):
    """
    Log start, end and wall time of one command run.

    Yields a dict the caller may fill with an 'exit_status' entry.
    """
    shown = {k: v for k, v in options.items() if v is not None and k not in ('stdout', 'stderr')}
    logger.info(f"Command start: {command} | Options: {shown}")
    record = {'exit_status': 0, 'wall_time': 0.0}
    started = time.perf_counter()
    try:
        yield record
    except Exception as e:
        record['exit_status'] = getattr(e, 'exit_status', getattr(e, 'returncode', 1))
        logger.error(f"Command failed: {command} | {e.__class__.__name__}: {e}")
        raise
    finally:
        record['wall_time'] = time.perf_counter() - started
        logger.info(
            f"Command end: {command} | Status: {record['exit_status']} | "
            f"Wall time: {record['wall_time']:.3f} s"
        )
