import logging
import os
import sys

from . import config


def get_logger(name: str) -> logging.Logger:
    logger = logging.getLogger(name)
    level = os.environ.get(config.LOG_LEVEL_ENV_VAR, "INFO").upper()
    logger.setLevel(level)

    # stderr keeps stdout free for reports
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    handler.setFormatter(formatter)

    if not logger.handlers:
        logger.addHandler(handler)

    return logger
