"""Logging configuration for the mixnet simulator."""

import json
import logging
import logging.handlers
import os
import re
from pathlib import Path
from typing import Any, Dict, Optional


LOGGER_NAME = 'zcash_mixsim'

FILE_FORMAT = '%(asctime)s %(levelname)-8s %(module)s:%(lineno)d %(message)s'
CONSOLE_FORMAT = '%(asctime)s %(levelname)s %(message)s'

# Leading "[Mixnet]", "[Ledger]", ... tag of a message
_COMPONENT = re.compile(r'^\[(\w+)\]')


class ColoredFormatter(logging.Formatter):
    """Console formatter coloring the level name and the component tag."""

    LEVEL_COLORS = {
        logging.DEBUG: '\033[36m',
        logging.INFO: '\033[32m',
        logging.WARNING: '\033[33m',
        logging.ERROR: '\033[31m',
        logging.CRITICAL: '\033[1;31m',
    }
    TAG_COLOR = '\033[1;34m'
    RESET = '\033[0m'

    def format(self, record: logging.LogRecord) -> str:
        color = self.LEVEL_COLORS.get(record.levelno)
        line = super().format(record)
        if color is None:
            return line
        line = line.replace(record.levelname, f"{color}{record.levelname}{self.RESET}", 1)
        message = record.getMessage()
        tag = _COMPONENT.match(message)
        if tag:
            line = line.replace(tag.group(0), f"{self.TAG_COLOR}{tag.group(0)}{self.RESET}", 1)
        return line


class SimLogger:
    """
    Owner of the simulator's named logger.

    `setup` is idempotent: the first call wins, later calls return the same
    logger. Tests reset `_instance` to configure it again.
    """

    _instance: Optional[logging.Logger] = None

    @classmethod
    def setup(cls, config: Dict[str, Any]) -> logging.Logger:
        """
        Attach a rotating file handler and, optionally, a colored console handler.

        `MIXSIM_LOG_FILE` and `LOG_LEVEL` override the `logging` section.

        Args:
            config: Validated scenario config

        Returns:
            The `zcash_mixsim` logger
        """
        if cls._instance is not None:
            return cls._instance

        section = config.get('logging', {})
        log_file = Path(os.getenv('MIXSIM_LOG_FILE') or section.get('file', 'logs/mixsim.log'))
        level_name = os.getenv('LOG_LEVEL', section.get('level', 'INFO')).upper()
        level = getattr(logging, level_name, logging.INFO)

        logger = logging.getLogger(LOGGER_NAME)
        logger.setLevel(level)
        logger.propagate = False
        logger.handlers.clear()

        logger.addHandler(cls._file_handler(log_file, section))
        if section.get('console_output', True):
            logger.addHandler(cls._console_handler(level))

        cls._instance = logger
        logger.info(f"[Logging] level {level_name}, file {log_file}")
        return logger

    @staticmethod
    def _file_handler(log_file: Path, section: Dict[str, Any]) -> logging.Handler:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=section.get('max_size_mb', 10) * 1024 * 1024,
            backupCount=section.get('backup_count', 5),
            encoding='utf-8',
        )
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
        return handler

    @staticmethod
    def _console_handler(level: int) -> logging.Handler:
        handler = logging.StreamHandler()
        handler.setLevel(level)
        handler.setFormatter(ColoredFormatter(CONSOLE_FORMAT, datefmt='%H:%M:%S'))
        return handler


class HopLog:
    """
    Line-delimited JSON log of per-hop mix processing and advisory exchanges.

    Each run gets its own child logger so parallel scenario runs never share
    a file handler. Without a path the log is a no-op sink.
    """

    def __init__(self, run_name: str, path: Optional[Path] = None):
        """
        Initialize the hop log.

        Args:
            run_name: Scenario id, used to name the child logger
            path: Target .jsonl file, or None to discard records
        """
        self.path = Path(path) if path is not None else None
        self._logger = logging.getLogger(f'{LOGGER_NAME}.hops.{run_name}')
        self._logger.setLevel(logging.DEBUG)
        self._logger.propagate = False
        self._logger.handlers.clear()

        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            handler = logging.FileHandler(self.path, mode='w', encoding='utf-8')
            handler.setFormatter(logging.Formatter('%(message)s'))
            self._logger.addHandler(handler)
        else:
            self._logger.addHandler(logging.NullHandler())

    def record(self, event: str, **fields: Any) -> None:
        """Write one JSON object with the given event name and fields."""
        if self.path is None:
            return
        payload = {'event': event, **fields}
        self._logger.debug(json.dumps(payload, sort_keys=True, default=str))

    def close(self) -> None:
        """Flush and detach the file handler."""
        for handler in list(self._logger.handlers):
            handler.close()
            self._logger.removeHandler(handler)
