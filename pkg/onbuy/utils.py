"""
onbuy Logging and Runtime Utilities
===================================

Centralized logging configuration and worker-count resolution for onbuy
experiments.
"""

import logging
import os
import sys
from typing import Optional, TextIO

THREADS_ENV = "ONBUY_THREADS"


def setup_logger(
    name: str = "onbuy", level: str = "INFO", stream: Optional[TextIO] = None
) -> logging.Logger:
    """
    Setup onbuy logger with consistent formatting.

    Args:
        name: Logger name (default: "onbuy")
        level: Log level ("DEBUG", "INFO", "WARNING", "ERROR")
        stream: Output stream for the handler (default: stderr, so that CSV
            written to stdout stays clean)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Set level even when the logger is already configured
    log_level = getattr(logging, level.upper(), logging.INFO)
    logger.setLevel(log_level)

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s", datefmt="%H:%M:%S"
    )

    handler = logging.StreamHandler(stream if stream is not None else sys.stderr)
    handler.setFormatter(formatter)
    logger.addHandler(handler)

    return logger


def get_component_logger(component_name: str) -> logging.Logger:
    """
    Get logger for a specific onbuy component.

    Args:
        component_name: Name of the component class (e.g. "Harness")

    Returns:
        Logger instance for the component
    """
    return logging.getLogger(f"onbuy.{component_name}")


def resolve_threads(requested: Optional[int] = None) -> int:
    """
    Resolve the joblib worker count.

    An explicit ``requested`` value wins; otherwise ``ONBUY_THREADS`` is read.
    Zero (or an unset variable) means "all cores", which joblib spells -1.

    Raises:
        ValueError: If the value is negative or not an integer
    """
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError as e:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    if requested < 0:
        raise ValueError(f"Worker count must be >= 0, got {requested}")
    return -1 if requested == 0 else requested
