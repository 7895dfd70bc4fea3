"""Environment-driven configuration for sbmca."""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import InvalidArgumentError


def _parse_workers(raw: str) -> int:
    try:
        return int(raw)
    except ValueError as e:
        raise InvalidArgumentError(f"SBMCA_WORKERS must be an integer, got '{raw}'") from e


SBMCA_LOG_LEVEL = os.getenv("SBMCA_LOG_LEVEL", "WARNING")
SBMCA_WORKERS = _parse_workers(os.getenv("SBMCA_WORKERS", "1"))
SBMCA_RESULTS_DIR = os.getenv("SBMCA_RESULTS_DIR", "./results")


def configure(
    log_level: Optional[str] = None,
    workers: Optional[int] = None,
    results_dir: Optional[str] = None,
) -> None:
    """
    Override configuration programmatically.

    Args:
        log_level: Logging level name for the ``sbmca`` logger (e.g. "INFO")
        workers: Thread count used for grid search and column-parallel lasso
        results_dir: Default output root for CLI commands

    Values are also written back to the environment so subprocesses agree.
    """
    global SBMCA_LOG_LEVEL, SBMCA_WORKERS, SBMCA_RESULTS_DIR

    if log_level is not None:
        SBMCA_LOG_LEVEL = log_level.upper()
        os.environ["SBMCA_LOG_LEVEL"] = SBMCA_LOG_LEVEL
        logging.getLogger("sbmca").setLevel(SBMCA_LOG_LEVEL)
    if workers is not None:
        if workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {workers}")
        SBMCA_WORKERS = workers
        os.environ["SBMCA_WORKERS"] = str(workers)
    if results_dir is not None:
        SBMCA_RESULTS_DIR = results_dir
        os.environ["SBMCA_RESULTS_DIR"] = results_dir


def get_workers() -> int:
    return max(1, SBMCA_WORKERS)


def current_config() -> Dict[str, Any]:
    """Return the effective configuration."""
    return {
        "log_level": SBMCA_LOG_LEVEL,
        "workers": SBMCA_WORKERS,
        "results_dir": SBMCA_RESULTS_DIR,
    }


def results_path(name: str) -> Path:
    """Default location for a CLI output called ``name``, under SBMCA_RESULTS_DIR."""
    return Path(SBMCA_RESULTS_DIR) / name
