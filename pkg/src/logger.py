import logging
import sys
from pathlib import Path

from tqdm import tqdm

from src.config import settings
from src.constants import DATETIME_FORMAT, Environment

LOGS_DIR = Path(settings.LOGS_DIR)

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
APP_LOG_FILENAME = "app.log"
ERROR_LOG_FILENAME = "error.log"

# Every module logger is a child of this one and propagates to its handlers
ROOT_LOGGER_NAME = "src"

ENVIRONMENT_LEVELS = {
    Environment.DEVELOPMENT: logging.DEBUG,
    Environment.STAGING: logging.INFO,
    Environment.PRODUCTION: logging.WARNING,
}


class TqdmStreamHandler(logging.StreamHandler):
    """Console handler that prints above active progress bars instead of through them."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record), file=self.stream)
        except Exception:
            self.handleError(record)


def configure_logging() -> logging.Logger:
    """Attach console and file handlers to the package logger, once per process.

    Returns:
        The package logger
    """
    root = logging.getLogger(ROOT_LOGGER_NAME)
    if root.handlers:
        return root

    root.setLevel(settings.LOG_LEVEL or ENVIRONMENT_LEVELS[settings.ENVIRONMENT])
    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATETIME_FORMAT)

    console = TqdmStreamHandler(sys.stdout)
    console.setFormatter(formatter)
    root.addHandler(console)

    LOGS_DIR.mkdir(parents=True, exist_ok=True)
    everything = logging.FileHandler(LOGS_DIR / APP_LOG_FILENAME)
    everything.setFormatter(formatter)
    root.addHandler(everything)

    errors = logging.FileHandler(LOGS_DIR / ERROR_LOG_FILENAME)
    errors.setLevel(logging.ERROR)
    errors.setFormatter(formatter)
    root.addHandler(errors)

    root.propagate = False
    return root


def get_logger(name: str) -> logging.Logger:
    """Get a module logger wired to the package handlers.

    Usage:
        from src.logger import get_logger

        logger = get_logger(__name__)
        logger.info(f"Pruned {removed} channels of {layer_id}")
    """
    configure_logging()
    if name != ROOT_LOGGER_NAME and not name.startswith(f"{ROOT_LOGGER_NAME}."):
        name = f"{ROOT_LOGGER_NAME}.{name}"
    return logging.getLogger(name)
