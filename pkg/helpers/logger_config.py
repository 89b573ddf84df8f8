"""
Logging for optimization runs: JSON lines (or a concise text form) on stdout,
tagged with the run id, mode and iteration of the active run.
"""

import json
import logging
import os
import sys
import traceback
from contextvars import ContextVar
from datetime import datetime, timezone

import numpy as np
import structlog

run_context_var: ContextVar[dict | None] = ContextVar("run_context", default=None)

CONCISE_LOGGING = os.environ.get("CONCISE_LOGGING", "false").lower() == "true"

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO").upper()

# Unknown names fall back to INFO
RUN_LOG_LEVEL = logging.getLevelNamesMapping().get(LOG_LEVEL, logging.INFO)

_NO_TRACEBACK = "NoneType: None\n"


def bind_run_context(**fields):
    """Merge fields (run_id, iteration, mode, ...) into the active run context."""
    current = dict(run_context_var.get() or {})
    current.update(fields)
    run_context_var.set(current)


def clear_run_context():
    run_context_var.set(None)


# run context key -> JSON field
_CONTEXT_FIELDS = {"run_id": "runId", "mode": "mode", "iteration": "iteration"}


def _to_jsonable(value):
    # numpy scalars and arrays show up in most payloads
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def _current_traceback() -> str | None:
    tb = traceback.format_exc()
    return None if tb == _NO_TRACEBACK else tb


def _concise_line(msg, level, context, data, process_time, tb) -> str:
    timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M:%S")
    parts = [f"{timestamp} | {level.upper()} | {msg}"]
    if context:
        parts.append(" ".join(f"{key}={value}" for key, value in sorted(context.items())))
    if process_time is not None:
        parts.append(f"process_time={process_time}")
    if data:
        parts.append(f"data={json.dumps(data, default=_to_jsonable)}")
    if tb:
        parts.append(f"traceback={tb}")
    return " | ".join(parts)


def log_json(msg, data=None, process_time=None, level="info", include_traceback=False):
    """Build one log record, a dict for JSON output or a line in concise mode."""
    context = run_context_var.get() or {}
    tb = _current_traceback() if include_traceback else None
    if CONCISE_LOGGING:
        return _concise_line(msg, level, context, data, process_time, tb)

    log_data = {
        "level": level,
        "ts": datetime.now(timezone.utc).isoformat(),
        "msg": msg,
        "platform": "robust-shape-optimizer",
    }
    for key, field in _CONTEXT_FIELDS.items():
        if context.get(key) is not None:
            log_data[field] = context[key]
    if process_time is not None:
        log_data["process_time"] = process_time
    if data is not None:
        log_data["data"] = data
    if tb:
        log_data["traceback"] = tb
    return log_data


class CustomLogger(logging.Logger):
    """Logger taking `data=`, `process_time=` and `include_traceback=` keywords."""

    def __init__(self, name, level=logging.NOTSET):
        super().__init__(name, level)
        self.addHandler(logging.StreamHandler(sys.stdout))
        self.setLevel(RUN_LOG_LEVEL)

    def _emit(self, emit, msg, level, *args, **kwargs):
        data = kwargs.pop("data", None)
        process_time = kwargs.pop("process_time", None)
        include_traceback = kwargs.pop("include_traceback", level == "error")
        kwargs.pop("error", None)

        try:
            record = log_json(
                msg,
                data=data,
                process_time=process_time,
                level=level,
                include_traceback=include_traceback,
            )
        except Exception as e:
            record = f"Error logging {level}: {e}"

        if not isinstance(record, str):
            record = json.dumps(record, default=_to_jsonable)
        emit(record, *args, **kwargs)

    def debug(self, msg, *args, **kwargs):
        if self.isEnabledFor(logging.DEBUG):
            self._emit(super().debug, msg, "debug", *args, **kwargs)

    def info(self, msg, *args, **kwargs):
        self._emit(super().info, msg, "info", *args, **kwargs)

    def warning(self, msg, *args, **kwargs):
        self._emit(super().warning, msg, "warn", *args, **kwargs)

    def error(self, msg, *args, **kwargs):
        self._emit(super().error, msg, "error", *args, **kwargs)

    def exception(self, msg, *args, **kwargs):
        kwargs.setdefault("include_traceback", True)
        self._emit(super().error, msg, "exception", *args, **kwargs)


def _event_to_msg(logger, method_name, event_dict):
    event_dict["msg"] = event_dict.pop("event", "")
    return event_dict


def setup_logging():
    """Route structlog progress events and stdlib records to stdout as JSON."""
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            _event_to_msg,
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(default=_to_jsonable),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    logging.basicConfig(
        level=RUN_LOG_LEVEL,
        format="%(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True,
    )


def get_progress_logger(**initial_values):
    """Structured logger for per-iteration progress events."""
    return structlog.get_logger("progress").bind(**initial_values)


logger = CustomLogger(name="rso_logger", level=RUN_LOG_LEVEL)
