"""
Logging utilities for Stratified HJB.

This module contains utilities for setting up logging.
"""

import os
import logging
import logging.handlers
from datetime import datetime

LOGGER_NAME = "stratified_hjb"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def setup_logging(log_level: int = logging.INFO, log_to_file: bool = True) -> logging.Logger:
    """
    Set up logging for the application.

    Args:
        log_level: Logging level (default: INFO)
        log_to_file: Also write a per-run log file and the rotating app.log

    Returns:
        Logger instance
    """
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(log_level)

    # Check if handlers are already configured (to avoid duplicate handlers)
    if logger.handlers:
        return logger

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_to_file:
        logs_dir = get_logs_directory()
        os.makedirs(logs_dir, exist_ok=True)

        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        log_file = os.path.join(logs_dir, f"stratified_hjb_{timestamp}.log")
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(log_level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

        # Rotating log that keeps history across runs
        rotating_handler = logging.handlers.RotatingFileHandler(
            os.path.join(logs_dir, "app.log"),
            maxBytes=5*1024*1024,  # 5 MB
            backupCount=3
        )
        rotating_handler.setLevel(log_level)
        rotating_handler.setFormatter(formatter)
        logger.addHandler(rotating_handler)

    logger.info("Logging initialized")

    return logger


def set_log_level(log_level: str) -> None:
    """
    Change the level of the package logger and of every handler it owns.

    Args:
        log_level: One of LOG_LEVELS, case-insensitive

    Raises:
        ValueError: the name is not a logging level
    """
    name = str(log_level).upper()
    if name not in LOG_LEVELS:
        raise ValueError(f"Unknown log level: {log_level}")
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(name)
    for handler in logger.handlers:
        handler.setLevel(name)


def get_logs_directory() -> str:
    """
    Get the logs directory.

    Returns:
        Path to logs directory
    """
    home = os.environ.get("STRATIFIED_HJB_HOME")
    if home:
        return os.path.join(home, "logs")
    return os.path.join(os.path.expanduser("~"), ".stratified_hjb", "logs")


class LoggerAdapter(logging.LoggerAdapter):
    """
    Logger adapter for adding contextual information to log records.

    This adapter adds a prefix to log messages for better context tracking.
    """

    def __init__(self, logger: logging.Logger, prefix: str):
        """
        Initialize the logger adapter.

        Args:
            logger: The logger to adapt
            prefix: Prefix to add to messages
        """
        super().__init__(logger, {})
        self.prefix = prefix

    def process(self, msg, kwargs):
        return f"[{self.prefix}] {msg}", kwargs


def get_module_logger(module_name: str) -> LoggerAdapter:
    """
    Get a logger for a specific module.

    Args:
        module_name: Name of the module

    Returns:
        Logger adapter prefixing messages with the module name
    """
    return LoggerAdapter(logging.getLogger(LOGGER_NAME), module_name)
