"""包内统一 logger，各模块通过 ``from ..core.log import logger`` 使用。"""

import logging
import sys

logger = logging.getLogger("lgnlab")
logger.addHandler(logging.NullHandler())

_LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
_configured = False


def setup_logging(verbosity: int = 0) -> None:
    """配置日志输出到 stderr：0 → WARNING，1 → INFO，≥2 → DEBUG"""
    global _configured
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logger.setLevel(level)
    if _configured:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_LOG_FORMAT))
    logger.addHandler(handler)
    logger.propagate = False
    _configured = True
