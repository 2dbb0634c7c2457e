import logging
import os
import sys

from pythonjsonlogger import jsonlogger

LOG_FORMAT = (
    "%(asctime)s %(levelname)s %(message)s %(module)s %(funcName)s "
    "%(process)d %(threadName)s"
)


def _formatter() -> jsonlogger.JsonFormatter:
    return jsonlogger.JsonFormatter(
        LOG_FORMAT,
        rename_fields={
            "asctime": "timestamp",
            "levelname": "level",
            "funcName": "func",
            "threadName": "thread",
        },
        json_ensure_ascii=False,
    )


def setup_logging():
    log_level = os.getenv("LOG_LEVEL", "INFO").upper()
    logger = logging.getLogger()

    # Avoid duplicate handlers if setup_logging is called multiple times
    if logger.hasHandlers():
        return logger

    logger.setLevel(getattr(logging, log_level, logging.INFO))

    # stderr only: stdout carries command output
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(_formatter())
    logger.addHandler(console_handler)

    log_dir = os.getenv("CRASP_LOG_DIR")
    if log_dir and os.path.isdir(log_dir):
        file_handler = logging.FileHandler(os.path.join(log_dir, "crasp.log"))
        file_handler.setFormatter(_formatter())
        logger.addHandler(file_handler)

    return logger
