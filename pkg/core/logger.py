import logging
import os
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Optional
import sys

from colorama import Fore, Style, just_fix_windows_console

FORMAT_STR = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FMT = '%Y-%m-%d %H:%M:%S'

_LEVEL_COLORS = {
    logging.DEBUG: Fore.CYAN,
    logging.INFO: Fore.GREEN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.MAGENTA,
}


class ColorFormatter(logging.Formatter):
    """Console formatter that colours the level name"""

    def format(self, record: logging.LogRecord) -> str:
        color = _LEVEL_COLORS.get(record.levelno)
        if not color:
            return super().format(record)
        original = record.levelname
        record.levelname = f"{color}{original}{Style.RESET_ALL}"
        try:
            return super().format(record)
        finally:
            record.levelname = original


def setup_logging(name='ratbench', log_level=logging.INFO, log_dir: Optional[str] = None):
    """
    Configure and set up logging for an experiment run

    Args:
        name: Logger name
        log_level: Logging level (default: INFO)
        log_dir: Directory for the rotating log file (default: <project>/logs)

    Returns:
        logging.Logger: Configured logger instance
    """
    if isinstance(log_level, str):
        log_level = getattr(logging, log_level.upper(), logging.INFO)
    try:
        just_fix_windows_console()

        if log_dir is None:
            project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
            log_dir = os.path.join(project_root, 'logs')
        os.makedirs(log_dir, exist_ok=True)

        timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
        log_file = os.path.join(log_dir, f'{name.lower()}_{timestamp}.log')

        logger = logging.getLogger(name)
        logger.setLevel(log_level)

        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(ColorFormatter(FORMAT_STR, datefmt=DATE_FMT))
        console_handler.setLevel(log_level)

        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setFormatter(logging.Formatter(FORMAT_STR, datefmt=DATE_FMT))
        file_handler.setLevel(log_level)

        # Remove existing handlers to avoid duplicates
        logger.handlers.clear()
        logger.addHandler(console_handler)
        logger.addHandler(file_handler)

        # Library loggers (modules.*, core.*) propagate into this one
        for child in ('modules', 'core'):
            child_logger = logging.getLogger(child)
            child_logger.setLevel(log_level)
            child_logger.handlers = logger.handlers

        logger.info(f"Logging initialized - {name}")
        logger.info(f"Log file created at: {log_file}")
        return logger

    except Exception as e:
        logging.basicConfig(level=log_level, format=FORMAT_STR, datefmt=DATE_FMT)
        logging.error(f"Failed to initialize custom logging: {e}")
        return logging.getLogger(name)


def log_exception(logger, message, exc_info=True):
    """
    Log an exception with full traceback

    Args:
        logger: Logger instance
        message: Error message
        exc_info: Whether to include exception info
    """
    logger.exception(message) if exc_info else logger.error(message)


def log_startup(logger, stage_name):
    """Log stage startup with a consistent format"""
    logger.info(f"Starting {stage_name}...")


def log_shutdown(logger, stage_name):
    """Log stage completion with a consistent format"""
    logger.info(f"Finished {stage_name}")


def log_metrics(logger, stage: str, **fields):
    """
    Emit one structured diagnostics line: ``stage=<name> key=value ...``

    Floats are written with 6 significant digits so lines stay greppable.
    """
    parts = [f"stage={stage}"]
    for key, value in fields.items():
        if isinstance(value, float):
            parts.append(f"{key}={value:.6g}")
        else:
            parts.append(f"{key}={value}")
    logger.info(" ".join(parts))


__all__ = ['setup_logging', 'log_exception', 'log_startup', 'log_shutdown', 'log_metrics']
