import sys
import os
import logging
from logging import Logger
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path
from typing import Union
from config import settings_manager

LOGGER_NAME = 'tollgrid'
LOG_FORMAT = '%(asctime)s %(levelname)s %(pathname)s:%(lineno)d - %(message)s'
RUN_LOG_NAME = 'run.log'


# Ensure UTF-8 output for unicode in console logs
if hasattr(sys.stdout, "reconfigure"):
    sys.stdout.reconfigure(encoding='utf-8')
if hasattr(sys.stderr, "reconfigure"):
    sys.stderr.reconfigure(encoding='utf-8')


class LogFilter(logging.Filter):
    """
    Log filter to shorten file path in logs relative to the project root.
    """

    def filter(self, record: logging.LogRecord) -> bool:
        file_path = record.pathname
        try:
            project_root_path = Path(__file__).resolve().parents[1]
            record.pathname = os.path.relpath(file_path, project_root_path)
        except ValueError:
            record.pathname = file_path
        return True


def _decorate(handler: logging.Handler) -> logging.Handler:
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.addFilter(LogFilter())
    return handler


def parse_level(level: Union[str, int, None]) -> int:
    """
    Maps a level name (case-insensitive) or number to a logging level; unknown names fall back to INFO.
    """
    if isinstance(level, int):
        return level
    return getattr(logging, (level or 'INFO').upper().strip(), logging.INFO)


def get_logger() -> Logger:
    """
    Initializes and returns the tollgrid logger: console on stderr plus a midnight-rotated file.
    """

    logger = logging.getLogger(LOGGER_NAME)

    # Prevent duplicate handlers if logger is already set
    if logger.handlers:
        return logger

    logger.setLevel(parse_level(settings_manager.get_key('LOGGING_LEVEL')))
    logger.propagate = False

    # stdout is reserved for CLI summaries
    logger.addHandler(_decorate(logging.StreamHandler(sys.stderr)))

    log_dir = settings_manager.get_key('LOGGING_FOLDER_PATH') or "./logs"
    log_file = settings_manager.get_key('LOGGING_FILE_NAME') or "tollgrid.log"
    log_path = os.path.join(log_dir, log_file)

    try:
        os.makedirs(os.path.dirname(log_path), exist_ok=True)
        file_handler = TimedRotatingFileHandler(
            log_path, when="midnight", interval=1, backupCount=30, encoding="utf-8"
        )
    except OSError as exception:
        logger.warning("File logging disabled, cannot open %s: %s", log_path, exception)
        return logger

    logger.addHandler(_decorate(file_handler))
    return logger


def set_level(level: Union[str, int]) -> None:
    """
    Changes the level of the tollgrid logger for the rest of the process.
    """
    logging.getLogger(LOGGER_NAME).setLevel(parse_level(level))


def attach_run_log(out_dir: Path) -> logging.Handler:
    """
    Mirrors every record of one CLI run into ``<out_dir>/run.log`` (overwritten per run).
    """
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    handler = _decorate(logging.FileHandler(Path(out_dir) / RUN_LOG_NAME, mode="w", encoding="utf-8"))
    logging.getLogger(LOGGER_NAME).addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    logging.getLogger(LOGGER_NAME).removeHandler(handler)
    handler.close()


# Global logger instance
log = get_logger()
