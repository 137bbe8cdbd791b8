"""Logging configuration for the nonsmooth DP toolkit."""

import logging.config
import os
from pathlib import Path
from typing import Any, Dict

DEFAULT_LOG_DIR = "./logs"
LOG_FILE_NAME = "nsdp.log"

# Console verbosity by -v count; index clipped to the last entry
VERBOSITY_LEVELS = ("WARNING", "INFO", "DEBUG")


def build_logging_config(log_dir: Path, console_level: str = "WARNING") -> Dict[str, Any]:
    """Build the dictConfig mapping used by the package and the CLI.

    Console output goes to stderr so that machine-readable reports written to
    stdout stay clean.
    """
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "detailed": {
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
                "datefmt": "%Y-%m-%d %H:%M:%S",
            },
            "console": {
                "format": "%(levelname)s: %(message)s",
            },
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "level": console_level,
                "formatter": "console",
                "stream": "ext://sys.stderr",
            },
            "file": {
                "class": "logging.handlers.RotatingFileHandler",
                "level": "DEBUG",
                "formatter": "detailed",
                "filename": str(log_dir / LOG_FILE_NAME),
                "maxBytes": 10485760,  # 10MB
                "backupCount": 5,
                "encoding": "utf8",
            },
        },
        "loggers": {
            "src": {
                "level": "DEBUG",
                "handlers": ["console", "file"],
                "propagate": False,
            },
            # numpy/scipy emit warnings through the warnings module only
            "py.warnings": {
                "level": "WARNING",
                "handlers": ["file"],
                "propagate": False,
            },
        },
        "root": {
            "level": "INFO",
            "handlers": ["console", "file"],
        },
    }


def resolve_log_dir() -> Path:
    """Return the log directory, creating it if needed."""
    log_dir = Path(os.getenv("NSDP_LOG_DIR", DEFAULT_LOG_DIR))
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir


def configure_logging(verbosity: int = 0) -> None:
    """Apply the logging configuration with a console level picked by verbosity."""
    level = VERBOSITY_LEVELS[min(max(verbosity, 0), len(VERBOSITY_LEVELS) - 1)]
    logging.config.dictConfig(build_logging_config(resolve_log_dir(), console_level=level))


LOGGING_CONFIG = build_logging_config(resolve_log_dir())
