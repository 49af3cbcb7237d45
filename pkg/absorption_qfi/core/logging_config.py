import logging
import os
import sys
from typing import Any, Dict

from pythonjsonlogger import jsonlogger

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

PACKAGE_LOGGERS = [
    "absorption_qfi",
    "absorption_qfi.core",
    "absorption_qfi.performance",
    "absorption_qfi.error_handling",
]

NOISY_LOGGERS = ["matplotlib", "PIL"]


def _quiet_libraries() -> None:
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def setup_logging(level: str = "INFO") -> None:
    """
    Configure logging for absorption-qfi.

    All records go to stderr; stdout carries command results only.

    Args:
        level: Logging level (default: 'INFO')
    """
    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    root_logger.setLevel(level.upper())

    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setFormatter(logging.Formatter(DEFAULT_FORMAT))
    root_logger.addHandler(stderr_handler)

    for logger_name in PACKAGE_LOGGERS:
        package_logger = logging.getLogger(logger_name)
        package_logger.setLevel(logging.NOTSET)
        package_logger.propagate = True
        package_logger.handlers = []

    _quiet_libraries()
    logging.getLogger(__name__).debug(f"Logging configured at level {level.upper()}")


def _make_handler(handler_cfg: Dict[str, Any]) -> logging.Handler:
    kind = handler_cfg.get("type", "StreamHandler")
    if kind == "StreamHandler":
        return logging.StreamHandler(sys.stderr)
    if kind == "FileHandler":
        filename = handler_cfg.get("filename")
        if not filename:
            raise ValueError("FileHandler configured but no filename provided")
        return logging.FileHandler(filename)
    raise ValueError(f"Unsupported handler type: {kind}")


def setup_logging_from_config(logging_config: Dict[str, Any]) -> None:
    """
    Set up logging from the `logging` section of a run configuration.
    Supports StreamHandler (stderr) and FileHandler entries, per-handler levels and formats, and JSON output
    for handlers with `json: true`. The LOGGING_LEVEL environment variable overrides the configured level.
    """
    logger = logging.getLogger(__name__)

    env_log_level = os.getenv("LOGGING_LEVEL", "").upper()
    config_log_level = str(logging_config.get("level", "INFO")).upper()
    log_level = env_log_level or config_log_level

    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
    root_logger.setLevel(log_level)

    default_format = logging_config.get("format", DEFAULT_FORMAT)
    handlers = logging_config.get("handlers") or [{"type": "StreamHandler"}]

    skipped = []
    for handler_cfg in handlers:
        try:
            handler = _make_handler(handler_cfg)
        except (ValueError, OSError) as e:
            skipped.append(f"{handler_cfg.get('type', 'unknown')}: {e}")
            continue

        handler.setLevel(str(handler_cfg.get("level", log_level)).upper())
        log_format = handler_cfg.get("format", default_format)
        if handler_cfg.get("json", False):
            handler.setFormatter(jsonlogger.JsonFormatter(log_format))
        else:
            handler.setFormatter(logging.Formatter(log_format))
        root_logger.addHandler(handler)

    if not root_logger.handlers:
        fallback = logging.StreamHandler(sys.stderr)
        fallback.setFormatter(logging.Formatter(DEFAULT_FORMAT))
        root_logger.addHandler(fallback)

    _quiet_libraries()
    for problem in skipped:
        logger.warning(f"Skipped log handler ({problem})")
    logger.debug(
        f"Logging configured: level {log_level} (environment: {env_log_level or 'unset'}), "
        f"{len(root_logger.handlers)} handler(s)"
    )
