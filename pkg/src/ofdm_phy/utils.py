"""Logging utilities for the ofdm_phy package.

All package loggers hang off ``ofdm_phy``. Console output goes to stderr,
because the CLI may be writing a CSV table to stdout.
"""

import functools
import json
import logging
import sys
import time
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

import numpy as np

# Package logger; children come from get_logger()
logger = logging.getLogger("ofdm_phy")

DEFAULT_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _level(value: int | str | None, fallback: int = logging.INFO) -> int:
    """Numeric level for an int or a case-insensitive level name."""
    if value is None:
        return fallback
    if isinstance(value, int):
        return value
    return logging.getLevelNamesMapping().get(value.upper(), fallback)


def configure_logging(
    level: int | str = logging.INFO,
    log_file: str | None = None,
    log_format: str | None = None,
    date_format: str | None = None,
    propagate: bool = False,
    add_console_handler: bool = True,
    console_level: int | str | None = None,
    file_mode: str = "a",
    file_encoding: str = "utf-8",
) -> None:
    """Configure the package's logging system.

    Existing handlers on the package logger are replaced.

    Args:
        level: Logging level as int or name ('debug', 'INFO', ...)
        log_file: Optional path to a log file; parent folders are created
        log_format: Custom log format string (default: timestamp - name - level - message)
        date_format: Custom date format for log timestamps
        propagate: Whether to propagate records to the root logger
        add_console_handler: Whether to log to stderr
        console_level: Separate level for the stderr handler (default: ``level``)
        file_mode: File open mode ('a' for append, 'w' for overwrite)
        file_encoding: Encoding for the log file

    Examples:
        # Progress of long sweeps on stderr
        configure_logging(level="info")

        # Full trace to a file, warnings only on the console
        configure_logging(level="debug", log_file="runs/ofdm_phy.log", console_level="warning")

    """
    file_level = _level(level)
    stderr_level = _level(console_level, file_level)
    formatter = logging.Formatter(log_format or DEFAULT_LOG_FORMAT, date_format or DEFAULT_DATE_FORMAT)

    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    handlers: list[logging.Handler] = []
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode=file_mode, encoding=file_encoding)
        file_handler.setLevel(file_level)
        handlers.append(file_handler)
    if add_console_handler:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(stderr_level)
        handlers.append(console_handler)

    for handler in handlers:
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    logger.setLevel(min(file_level, stderr_level) if add_console_handler else file_level)
    logger.propagate = propagate


def get_logger(name: str | None = None) -> logging.Logger:
    """Get a logger instance for a specific module or component.

    Args:
        name: Component name, e.g. ``"channel"``

    Returns:
        Child of the ``ofdm_phy`` logger, or the package logger itself

    """
    return logger.getChild(name) if name else logger


def enable_debug_logging(log_file: str | None = None) -> None:
    """Turn on debug output, including call traces from :func:`log_function_call`."""
    configure_logging(level=logging.DEBUG, log_file=log_file)


def disable_logging() -> None:
    """Silence the package logger and drop its handlers."""
    logger.setLevel(logging.CRITICAL + 1)
    logger.handlers = []
    logger.propagate = False


def _summarize(value: Any) -> str:
    """Short form of an argument: arrays and signal models by shape."""
    for attr in ("samples", "bins"):
        inner = getattr(value, attr, None)
        if isinstance(inner, np.ndarray):
            return f"<{type(value).__name__} shape={inner.shape}>"
    shape = getattr(value, "shape", None)
    if shape is not None and len(shape) > 0:
        return f"<{type(value).__name__} shape={tuple(shape)}>"
    if hasattr(value, "model_fields"):
        return f"<{type(value).__name__}>"
    return repr(value)


def log_function_call(func):
    """Trace calls to ``func`` at debug level.

    Array and model arguments are summarized so the trace stays one line.
    Exceptions are logged with their traceback and re-raised.

    Args:
        func: The function to wrap

    Returns:
        Wrapped function

    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        func_logger = get_logger(func.__module__.removeprefix("ofdm_phy."))
        if func_logger.isEnabledFor(logging.DEBUG):
            params = [_summarize(a) for a in args] + [f"{k}={_summarize(v)}" for k, v in kwargs.items()]
            func_logger.debug(f"Calling {func.__name__}({', '.join(params)})")
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            func_logger.exception(f"{func.__name__} raised {type(e).__name__}: {e!s}")
            raise
        func_logger.debug(f"{func.__name__} returned successfully")
        return result

    return wrapper


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def log_to_json(message: str, level: int | str = logging.INFO, **extra_fields) -> None:
    """Log one JSON object built from ``message`` and ``extra_fields``.

    Examples:
        log_to_json("Run finished", experiment="ber_sweep", rows=5, wall_time_s=1.2)

    """
    numeric_level = _level(level)
    record = {
        "timestamp": datetime.now(UTC).isoformat(),
        "message": message,
        "level": logging.getLevelName(numeric_level),
        **extra_fields,
    }
    logger.log(numeric_level, json.dumps(record, default=_json_default))


class LogContext:
    """Logs entry, exit and elapsed time of a named block such as one experiment run.

    While the block runs, every log record carries a ``context_name``
    attribute usable in custom formats (``%(context_name)s``).

    Examples:
        with LogContext("run_ber_sweep", "harness", seed=7, points=5):
            ...

    """

    def __init__(self, context_name: str, logger_name: str | None = None, **context_data):
        self.context_name = context_name
        self.context_data = context_data
        self.logger = get_logger(logger_name)
        self._previous_factory = None
        self._started = 0.0

    def __enter__(self):
        """Install the record factory and log entry."""
        previous = logging.getLogRecordFactory()
        name = self.context_name

        def record_factory(*args, **kwargs):
            record = previous(*args, **kwargs)
            record.context_name = name
            return record

        self._previous_factory = previous
        logging.setLogRecordFactory(record_factory)
        suffix = f" {self.context_data}" if self.context_data else ""
        self.logger.info(f"Entered context: {self.context_name}{suffix}")
        self._started = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Log exit (or the error) with elapsed time and restore the factory."""
        elapsed = time.perf_counter() - self._started
        if exc_type:
            self.logger.error(
                f"Error in context {self.context_name} after {elapsed:.3f} s: {exc_type.__name__}: {exc_val}"
            )
        else:
            self.logger.info(f"Exited context: {self.context_name} ({elapsed:.3f} s)")
        logging.setLogRecordFactory(self._previous_factory)
        return False
