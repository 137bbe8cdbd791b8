"""Structured logging helpers shared by the solver, the audits and the CLI."""

import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from typing import Any, Dict


def get_logger(name: str) -> logging.Logger:
    """Logger for ``name`` (usually ``__name__``); handlers come from ``logging_config``."""
    return logging.getLogger(name)


def log_with_context(logger: logging.Logger, level: int, message: str, **context: Any) -> None:
    """Emit ``message`` with keyword context.

    The context is attached as ``record.context`` and appended as ``[key=value, ...]``
    so that the plain-text formatters keep it visible.

    Args:
        logger: Target logger
        level: Logging level such as ``logging.INFO``
        message: Log message
        **context: Stage, point, verdict and similar fields
    """
    if not logger.isEnabledFor(level):
        return
    if not context:
        logger.log(level, message)
        return
    rendered = ", ".join(f"{key}={value}" for key, value in context.items())
    logger.log(level, f"{message} [{rendered}]", extra={"context": context})


def log_operation(
    logger: logging.Logger,
    operation: str,
    **context: Any,
) -> None:
    """Log the start of an operation with context for traceability.

    Args:
        logger: Logger instance
        operation: Description of the operation
        **context: Additional context (e.g., stage, check, model_digest)
    """
    log_with_context(logger, logging.INFO, f"Operation: {operation}", **context)


@contextmanager
def timed_operation(
    logger: logging.Logger, operation: str, timings: Dict[str, float] | None = None, **context: Any
) -> Iterator[None]:
    """Log start and end of ``operation`` and store its wall time in ``timings``."""
    log_operation(logger, operation, **context)
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        if timings is not None:
            timings[operation] = elapsed
        log_with_context(logger, logging.DEBUG, f"Finished: {operation}", seconds=round(elapsed, 6))
