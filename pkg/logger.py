import logging
import os
import sys
import datetime
from logging.handlers import RotatingFileHandler

LOGGER_NAME = 'SEHSSL'
LEVEL_ENV = 'SEHSSL_LOG_LEVEL'
DIR_ENV = 'SEHSSL_LOG_DIR'


class LoggerSetup:
    """Setup logging for command-line runs with stderr and rotating file output"""

    def __init__(self, log_dir=None, level=None):
        """Initialize the logger

        Args:
            log_dir: directory for the rotating log file. Defaults to $SEHSSL_LOG_DIR,
                then "logs". An empty string disables file logging.
            level: console level name. Defaults to $SEHSSL_LOG_LEVEL, then INFO.
        """
        self.log_dir = log_dir if log_dir is not None else os.environ.get(DIR_ENV, "logs")
        self.level = (level or os.environ.get(LEVEL_ENV, "INFO")).upper()
        self._setup_log_directory()
        self._configure_logger()

    def _setup_log_directory(self):
        """Create log directory if it doesn't exist"""
        if self.log_dir and not os.path.exists(self.log_dir):
            os.makedirs(self.log_dir)

    def _configure_logger(self):
        """Configure the logger with appropriate handlers and formatters"""
        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False

        # Clear any existing handlers
        if self.logger.handlers:
            self.logger.handlers.clear()

        formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')

        # stdout carries JSON reports, so the console handler writes to stderr
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(self._resolve_level(self.level))
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        if self.log_dir:
            log_file = os.path.join(self.log_dir, f"sehssl_{datetime.datetime.now().strftime('%Y%m%d')}.log")
            file_handler = RotatingFileHandler(log_file, maxBytes=5*1024*1024, backupCount=5)
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)

    @staticmethod
    def _resolve_level(name):
        """Map a level name to its numeric value, falling back to INFO"""
        level = logging.getLevelName(name)
        return level if isinstance(level, int) else logging.INFO

    def get_logger(self):
        """Return the configured logger"""
        return self.logger
