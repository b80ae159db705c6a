"""
Logging setup for dirtrend.

Modules log through child loggers of ``dirtrend``; the CLI attaches a
timestamped file handler once per process.
"""

import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Optional

LOGGER_NAME = 'dirtrend'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logging.getLogger(LOGGER_NAME).addHandler(logging.NullHandler())


def setup_trend_logger(log_dir: Optional[str] = 'logs', level: str = 'INFO') -> logging.Logger:
    """
    Attach a file handler to the package logger.

    Args:
        log_dir: Directory for the log file; empty or None disables file logging.
            ``DIRTREND_LOG_DIR`` overrides it when set.
        level: Logging level name; ``DIRTREND_LOG_LEVEL`` overrides it.

    Returns:
        The configured ``dirtrend`` logger
    """
    logger = logging.getLogger(LOGGER_NAME)
    log_dir = os.getenv('DIRTREND_LOG_DIR', log_dir)
    level = os.getenv('DIRTREND_LOG_LEVEL', level)
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    # Avoid duplicate handlers
    if any(isinstance(h, logging.FileHandler) for h in logger.handlers):
        return logger
    if not log_dir:
        return logger

    logs_path = Path(log_dir)
    logs_path.mkdir(parents=True, exist_ok=True)

    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
    file_handler = logging.FileHandler(logs_path / f'dirtrend_{timestamp}.log', encoding='utf-8')
    file_handler.setLevel(logger.level)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
    logger.addHandler(file_handler)

    return logger
