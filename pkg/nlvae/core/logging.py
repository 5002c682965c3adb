"""
Logging configuration for the NLVAE engine.
Progress lines and diagnostics go to standard output through the root logger.
"""

import logging
import sys
from typing import Optional

from nlvae.core.config import get_settings

QUIET_LIBRARIES = ("matplotlib", "PIL")


def setup_logging(
    log_level: Optional[str] = None,
    log_format: Optional[str] = None
) -> None:
    """
    Configure the root logger once per CLI invocation.

    Args:
        log_level: Level name; defaults to NLVAE_LOG_LEVEL
        log_format: Format string; defaults to NLVAE_LOG_FORMAT
    """
    settings = get_settings()
    level_name = (log_level or settings.log_level).upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO

    logging.basicConfig(
        level=level,
        format=log_format or settings.log_format,
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True
    )

    # chatty at DEBUG
    for name in QUIET_LIBRARIES:
        logging.getLogger(name).setLevel(logging.WARNING)

    logging.getLogger("nlvae").setLevel(level)
    logging.getLogger("nlvae").debug(f"Logging configured with level: {level_name}")


def get_logger(name: str) -> logging.Logger:
    """Module logger; call with __name__."""
    return logging.getLogger(name)
