"""
byzsim.logging_structured
~~~~~~~~~~~~~~~~~~~~~~~~~
Structured JSON logging that correlates log records with the running experiment.

Every record emitted while a replication runs is enriched with the bound
run context:
    - mode         "mean" | "rcsl"
    - cell         grid cell label, e.g. "p=30,K=10,alpha=0.15"
    - aggregator   aggregator kind of the current run
    - replication  replication index (worker threads bind their own)

Activation::

    from byzsim.logging_structured import configure_logging
    configure_logging(level="INFO", fmt="json")

which installs the equivalent of::

    LOGGING = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "json":    {"()": "byzsim.logging_structured.StructuredJsonFormatter"},
            "verbose": {"()": "byzsim.logging_structured.StructuredVerboseFormatter"},
        },
        "handlers": {
            "console": {"class": "logging.StreamHandler", "formatter": "json"},
        },
        "loggers": {"byzsim": {"handlers": ["console"], "level": "INFO"}},
    }

Context binding uses a ContextVar, so each worker thread of the replication
pool carries its own fields.
"""

from __future__ import annotations

import json
import logging
import logging.config
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Any

_run_ctx: ContextVar[dict[str, Any] | None] = ContextVar("byzsim_log_ctx", default=None)


def bind_run_context(**fields: Any) -> None:
    """Merge *fields* into the current run context."""
    data = dict(_run_ctx.get(None) or {})
    data.update({k: v for k, v in fields.items() if v is not None})
    _run_ctx.set(data)


def get_run_context() -> dict[str, Any]:
    """Return the currently bound run context dict."""
    return _run_ctx.get(None) or {}


def clear_run_context() -> None:
    _run_ctx.set(None)


# ── JSON formatter ────────────────────────────────────────────────────────

class StructuredJsonFormatter(logging.Formatter):
    """
    Emits log records as single-line JSON objects.

    Example output::

        {"timestamp": "2026-10-18T14:30:00.123Z", "level": "INFO",
         "logger": "byzsim.simulator", "message": "cell finished",
         "mode": "rcsl", "cell": "p=30,K=10,alpha=0.05", "rmse": 0.027}
    """

    # LogRecord attributes that should NOT appear verbatim in the JSON
    _SKIP = frozenset({
        "msg", "args", "levelname", "levelno", "pathname", "filename",
        "module", "exc_info", "exc_text", "stack_info", "lineno",
        "funcName", "created", "msecs", "relativeCreated", "thread",
        "threadName", "processName", "process", "taskName",
        "name", "message",
    })

    def format(self, record: logging.LogRecord) -> str:
        record.message = record.getMessage()

        doc: dict[str, Any] = {
            "timestamp": datetime.fromtimestamp(record.created, tz=timezone.utc)
                                 .strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z",
            "level":     record.levelname,
            "logger":    record.name,
            "message":   record.message,
        }
        doc.update(get_run_context())

        # extra={"rmse": ...} fields
        for key, val in record.__dict__.items():
            if key not in self._SKIP and not key.startswith("_"):
                doc[key] = val

        if record.exc_info:
            doc["exception"] = self.formatException(record.exc_info)
        if record.stack_info:
            doc["stack"] = self.formatStack(record.stack_info)

        return json.dumps(doc, default=str, ensure_ascii=False)


class StructuredVerboseFormatter(logging.Formatter):
    """
    Human-readable formatter that still shows the bound run context.

    Example output::
        2026-10-18 14:30:00 INFO    [rcsl p=30,K=10,alpha=0.05 #17] cell finished
    """

    def format(self, record: logging.LogRecord) -> str:
        record.message = record.getMessage()
        ctx = get_run_context()
        parts = [str(ctx[k]) for k in ("mode", "cell") if ctx.get(k) is not None]
        if ctx.get("replication") is not None:
            parts.append(f"#{ctx['replication']}")
        tag = " ".join(parts) or "-"
        ts = datetime.fromtimestamp(record.created, tz=timezone.utc).strftime(
            "%Y-%m-%d %H:%M:%S"
        )
        line = f"{ts} {record.levelname:<7} [{tag}] {record.message}"
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


def configure_logging(level: str | None = None, fmt: str | None = None) -> None:
    """Install the byzsim console handler; arguments fall back to sim_settings."""
    from byzsim.conf import sim_settings

    level = (level or sim_settings.LOG_LEVEL).upper()
    fmt = fmt or sim_settings.LOG_FORMAT
    logging.config.dictConfig({
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "json":    {"()": "byzsim.logging_structured.StructuredJsonFormatter"},
            "verbose": {"()": "byzsim.logging_structured.StructuredVerboseFormatter"},
        },
        "handlers": {
            "console": {"class": "logging.StreamHandler", "formatter": fmt,
                        "stream": "ext://sys.stderr"},
        },
        "loggers": {
            "byzsim": {"handlers": ["console"], "level": level, "propagate": False},
        },
    })
