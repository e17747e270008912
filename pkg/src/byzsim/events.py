"""
byzsim.events
~~~~~~~~~~~~~
A lightweight synchronous event bus.

The simulator fires events at well-defined points of an experiment. Subscribe
from application code (progress bars, custom reporting) without touching the
simulation internals.

Built-in events
---------------
    replication_completed   one replication finished (index, error, iterations)
    replication_failed      one replication raised (index, exc)
    rcsl_nonconverged       tolerance rule hit max_T without e <= e_r (iterations, e)
    cell_completed          one grid cell of a table finished (row)
    cell_failed             one grid cell raised (cell, exc)
    aggregator_registered   a new aggregator kind was registered (name)

Usage::

    from byzsim.events import event_bus, CELL_COMPLETED

    @event_bus.on(CELL_COMPLETED)
    def report(row, **kw):
        print(row.aggregator, row.alpha, row.rmse)

Replications may run on worker threads; handlers must be thread-safe.
"""

from __future__ import annotations

import logging
import threading
from collections import defaultdict
from collections.abc import Callable
from typing import Any

logger = logging.getLogger("byzsim.events")

# ── Built-in event names ──────────────────────────────────────────────────
REPLICATION_COMPLETED  = "replication_completed"
REPLICATION_FAILED     = "replication_failed"
RCSL_NONCONVERGED      = "rcsl_nonconverged"
CELL_COMPLETED         = "cell_completed"
CELL_FAILED            = "cell_failed"
AGGREGATOR_REGISTERED  = "aggregator_registered"


class EventBus:
    """
    Central pub/sub event bus.

    Registration is guarded by a lock; emission calls handlers sequentially
    in registration order on the emitting thread.
    """

    def __init__(self) -> None:
        self._handlers: dict[str, list[Callable[..., Any]]] = defaultdict(list)
        self._wildcard: list[Callable[..., Any]] = []
        self._lock = threading.Lock()

    # ── Registration ───────────────────────────────────────────────────────

    def on(self, event: str) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
        """
        Decorator: register a handler for *event*.

        Handlers receive keyword arguments only; accept ``**kw`` so new
        fields can be added to events without breaking them.
        """
        def decorator(fn: Callable[..., Any]) -> Callable[..., Any]:
            with self._lock:
                self._handlers[event].append(fn)
            logger.debug("Registered handler %s for event '%s'",
                         getattr(fn, "__qualname__", repr(fn)), event)
            return fn
        return decorator

    def on_any(self, fn: Callable[..., Any]) -> Callable[..., Any]:
        """Register *fn* as a wildcard handler that receives every event."""
        with self._lock:
            self._wildcard.append(fn)
        return fn

    def off(self, event: str, fn: Callable[..., Any]) -> None:
        with self._lock:
            self._handlers[event] = [h for h in self._handlers[event] if h is not fn]

    def clear(self, event: str | None = None) -> None:
        """Remove all handlers for *event*, or all handlers if event is None."""
        with self._lock:
            if event is None:
                self._handlers.clear()
                self._wildcard.clear()
            else:
                self._handlers[event] = []

    # ── Emission ──────────────────────────────────────────────────────────

    def emit(self, event: str, **kwargs: Any) -> None:
        """
        Fire *event*, calling all registered handlers in order.

        Exceptions raised by handlers are logged and swallowed so a broken
        subscriber never aborts a simulation.
        """
        with self._lock:
            handlers = list(self._handlers.get(event, [])) + list(self._wildcard)
        for handler in handlers:
            try:
                handler(event=event, **kwargs)
            except Exception:
                logger.exception(
                    "Handler %s raised during event '%s'",
                    getattr(handler, "__qualname__", repr(handler)),
                    event,
                )

    def listeners(self, event: str) -> list[Callable[..., Any]]:
        return list(self._handlers.get(event, []))

    def events(self) -> list[str]:
        """Return all event names that have at least one handler."""
        return [k for k, v in self._handlers.items() if v]


# ── Global singleton ──────────────────────────────────────────────────────
event_bus = EventBus()
