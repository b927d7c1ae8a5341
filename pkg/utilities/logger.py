"""
Logging configuration for gpscav runs.
"""
import logging
import sys
from datetime import datetime

from setup.config_conf import LOGS_DIR

FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CONSOLE_FORMAT = "%(levelname)s: %(message)s"


def _tagged(handler, log_level, fmt):
    handler.setLevel(log_level)
    handler.setFormatter(logging.Formatter(fmt))
    handler._gpscav = True
    return handler


def setup_logging(log_level=logging.INFO, command=None):
    """Set up logging for one run.

    Handlers installed by an earlier call are replaced, so tests and several
    commands in one process log once per message.

    Args:
        log_level (int, optional): Logging level. Defaults to logging.INFO.
        command (str, optional): Subcommand name, used in the log file name.

    Returns:
        logging.Logger: The configured root logger
    """
    stem = f"gpscav_{command}" if command else "gpscav"
    log_file = LOGS_DIR / f"{stem}_{datetime.now():%Y%m%d_%H%M%S}.log"

    root = logging.getLogger()
    root.setLevel(log_level)
    for handler in [h for h in root.handlers if getattr(h, "_gpscav", False)]:
        root.removeHandler(handler)
        handler.close()

    root.addHandler(_tagged(logging.FileHandler(log_file), log_level, FILE_FORMAT))
    root.addHandler(_tagged(logging.StreamHandler(sys.stdout), log_level, CONSOLE_FORMAT))

    root.info(f"Logging initialized. Log file: {log_file}")
    return root
