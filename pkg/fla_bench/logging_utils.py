"""Logger factory used across the package.

Log records go to stderr through rich so that CSV written to stdout stays byte-stable.
"""

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

_console = Console(stderr=True)
_handler: RichHandler | None = None


def _get_handler() -> RichHandler:
    global _handler
    if _handler is None:
        _handler = RichHandler(
            console=_console,
            show_path=False,
            rich_tracebacks=False,
            log_time_format="[%X]",
        )
        _handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    return _handler


def get_logger(name: str) -> logging.Logger:
    logger = logging.getLogger(name)
    if not logger.handlers:
        logger.addHandler(_get_handler())
        logger.propagate = False
    logger.setLevel(os.getenv("FLA_LOG_LEVEL", "INFO").upper())
    return logger


def set_level(level: str) -> None:
    """Apply a level to every logger created through get_logger."""
    for name, logger in logging.root.manager.loggerDict.items():
        if isinstance(logger, logging.Logger) and name.startswith("fla_bench"):
            logger.setLevel(level.upper())
