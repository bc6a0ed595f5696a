"""Centralized logging configuration for the application."""
import logging
import sys
import json
from typing import Any, Dict, MutableMapping, Optional, Tuple
from app.core.config import settings


_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class JSONFormatter(logging.Formatter):
    """JSON formatter for structured logging (one object per line)."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data: Dict[str, Any] = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        if hasattr(record, "trial"):
            log_data["trial"] = record.trial

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        if hasattr(record, "extra_fields"):
            log_data.update(record.extra_fields)

        return json.dumps(log_data, default=str)


class ConsoleFormatter(logging.Formatter):
    """Human-readable formatter for console."""

    def __init__(self):
        super().__init__(
            fmt="%(asctime)s [%(levelname)8s] %(name)s: %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        )

    def format(self, record: logging.LogRecord) -> str:
        """Format log record for console, prefixing the trial tag when present."""
        message = super().format(record)
        if hasattr(record, "trial"):
            head, sep, tail = message.partition(": ")
            message = f"{head}{sep}[{record.trial}] {tail}"
        return message


class TrialLogger(logging.LoggerAdapter):
    """Attaches a trial tag (mode/seed) to every record so parallel trials stay attributable."""

    def process(self, msg: Any, kwargs: MutableMapping[str, Any]) -> Tuple[Any, MutableMapping[str, Any]]:
        extra = dict(kwargs.get("extra") or {})
        extra["trial"] = self.extra["trial"]
        kwargs["extra"] = extra
        return msg, kwargs


def trial_logger(name: str, mode: str, seed: int) -> TrialLogger:
    """Return a logger adapter tagged with the trial identity."""
    return TrialLogger(logging.getLogger(name), {"trial": f"{mode}/seed={seed}"})


def setup_logging(level: Optional[str] = None, log_format: Optional[str] = None) -> None:
    """
    Configure root logging.

    Level comes from FOGFORGE_LOG (error|warn|info|debug) unless overridden;
    format is console (default) or json.
    """
    level_name = (level or settings.log).lower()
    log_level = _LEVELS.get(level_name, logging.INFO)
    if (log_format or settings.log_format) == "json":
        formatter: logging.Formatter = JSONFormatter()
    else:
        formatter = ConsoleFormatter()

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers.clear()

    # Logs go to stderr so CSV/JSON written to stdout stays clean
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    logging.debug(f"Logging configured: level={logging.getLevelName(log_level)}")
