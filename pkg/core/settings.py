"""
Settings
Environment-driven configuration
"""

import os
import logging
from dataclasses import dataclass
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_MAX_ROW_COUNT = 100_000_000
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


@dataclass(frozen=True)
class Settings:
    """
    Snapshot of runtime settings

    Attributes:
        mc_workers: Threads used by the sampler and the MC oracle
        max_row_count: Per-row sample cap for the convergence scan
        db_path: SQLite path for run history, or None to disable
        log_level: Logging level name for the CLI
    """

    mc_workers: int = 1
    max_row_count: int = DEFAULT_MAX_ROW_COUNT
    db_path: str = None
    log_level: str = 'WARNING'


def _int_env(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={raw!r}")
        return default
    if value < 1:
        logger.warning(f"Ignoring non-positive {name}={raw!r}")
        return default
    return value


def _level_env(name, default):
    raw = (os.getenv(name) or default).strip().upper()
    if raw not in LOG_LEVELS:
        logger.warning(f"Ignoring unknown {name}={raw!r}")
        return default
    return raw


def get_settings():
    """
    Read settings from the environment

    Returns:
        Settings instance
    """
    return Settings(
        mc_workers=_int_env('MOMENTS_MC_WORKERS', 1),
        max_row_count=_int_env('MOMENTS_MAX_ROW_COUNT', DEFAULT_MAX_ROW_COUNT),
        db_path=os.getenv('MOMENTS_DB_PATH') or None,
        log_level=_level_env('MOMENTS_LOG_LEVEL', 'WARNING'),
    )
