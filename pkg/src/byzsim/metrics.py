"""
byzsim.metrics
~~~~~~~~~~~~~~
Metrics hooks with pluggable backends.

The simulator records replication counts, durations, solver failures and
RCSL iteration counts. No backend is active by default — zero overhead
unless you opt in.

Built-in backends
-----------------
    LoggingBackend     — writes metrics to the logging system (dev/test)
    PrometheusBackend  — prometheus_client counters/gauges/histograms

Activation via the environment::

    BYZSIM_METRICS=logging byzsim mean-sim --reps 50

or programmatically::

    from byzsim.metrics import metrics, LoggingBackend
    metrics.use(LoggingBackend())

Emitted metrics
---------------
    {ns}_replications_total           counter   (labels: mode, aggregator)
    {ns}_replication_duration_ms      histogram (labels: mode)
    {ns}_replication_failures_total   counter   (labels: mode)
    {ns}_rcsl_iterations              histogram (labels: aggregator)
    {ns}_rcsl_nonconverged_total      counter   (labels: aggregator)
"""

from __future__ import annotations

import logging
import threading
import time
from collections.abc import Callable
from functools import wraps
from typing import Any

logger = logging.getLogger("byzsim.metrics")


# ── Base backend ──────────────────────────────────────────────────────────

class BaseMetricsBackend:
    """Implement this interface to plug in any metrics system."""

    def increment(self, name: str, value: int = 1, labels: dict[str, str] | None = None) -> None:
        """Increment a counter metric."""

    def gauge(self, name: str, value: float, labels: dict[str, str] | None = None) -> None:
        """Set an absolute gauge value."""

    def timing(self, name: str, value_ms: float, labels: dict[str, str] | None = None) -> None:
        """Record a duration in milliseconds."""

    def histogram(self, name: str, value: float, labels: dict[str, str] | None = None) -> None:
        """Record a value in a histogram."""


# ── Logging backend ───────────────────────────────────────────────────────

class LoggingBackend(BaseMetricsBackend):
    """Writes metrics to Python logging. No external dependencies."""

    _log = logging.getLogger("byzsim.metrics.log")

    def __init__(self, namespace: str = "byzsim", level: int = logging.DEBUG):
        self._ns = namespace
        self._level = level

    def _emit(self, kind: str, name: str, value: Any, labels: dict[str, str] | None) -> None:
        self._log.log(self._level, "metric %s %s_%s=%s labels=%s",
                      kind, self._ns, name, value, labels or {})

    def increment(self, name, value=1, labels=None):  # type: ignore[no-untyped-def]
        self._emit("counter++", name, value, labels)

    def gauge(self, name, value, labels=None):  # type: ignore[no-untyped-def]
        self._emit("gauge", name, value, labels)

    def timing(self, name, value_ms, labels=None):  # type: ignore[no-untyped-def]
        self._emit("timing", name, f"{value_ms:.2f}ms", labels)

    def histogram(self, name, value, labels=None):  # type: ignore[no-untyped-def]
        self._emit("hist", name, value, labels)


# ── Prometheus backend ────────────────────────────────────────────────────

class PrometheusBackend(BaseMetricsBackend):
    """
    Prometheus metrics via ``prometheus_client``.

    Install::
        pip install "byzsim[prometheus]"
    """

    def __init__(self, namespace: str = "byzsim"):
        try:
            import prometheus_client as prom
        except ImportError as exc:
            raise ImportError(
                "PrometheusBackend requires prometheus_client. "
                "Install it with: pip install prometheus_client"
            ) from exc
        self._prom = prom
        self._ns   = namespace
        self._metrics: dict[tuple[str, str, tuple[str, ...]], Any] = {}
        self._lock = threading.Lock()

    def _metric(self, kind: str, name: str, label_names: list[str]) -> Any:
        key = (kind, name, tuple(label_names))
        if key not in self._metrics:
            with self._lock:
                if key not in self._metrics:
                    factory = {"counter": self._prom.Counter,
                               "gauge": self._prom.Gauge,
                               "histogram": self._prom.Histogram}[kind]
                    self._metrics[key] = factory(f"{self._ns}_{name}", name, label_names)
        return self._metrics[key]

    def _observe(self, kind: str, method: str, name: str, value: float,
                 labels: dict[str, str] | None) -> None:
        m = self._metric(kind, name, list(labels.keys()) if labels else [])
        target = m.labels(*labels.values()) if labels else m
        getattr(target, method)(value)

    def increment(self, name, value=1, labels=None):  # type: ignore[no-untyped-def]
        self._observe("counter", "inc", name, value, labels)

    def gauge(self, name, value, labels=None):  # type: ignore[no-untyped-def]
        self._observe("gauge", "set", name, value, labels)

    def timing(self, name, value_ms, labels=None):  # type: ignore[no-untyped-def]
        self.histogram(name, value_ms, labels)

    def histogram(self, name, value, labels=None):  # type: ignore[no-untyped-def]
        self._observe("histogram", "observe", name, value, labels)


_BUILTIN_BACKENDS: dict[str, type[BaseMetricsBackend]] = {
    "logging":    LoggingBackend,
    "prometheus": PrometheusBackend,
}


# ── Metrics facade ────────────────────────────────────────────────────────

class Metrics:
    """
    Global metrics facade. All code calls this; backends are swappable.

    Metrics are no-ops until a backend is configured. Backend failures are
    logged at DEBUG and never interrupt a simulation.
    """

    def __init__(self) -> None:
        self._backend: BaseMetricsBackend | None = None
        self._resolved = False
        self._lock = threading.Lock()

    def use(self, backend: BaseMetricsBackend | None) -> None:
        """Set (or with None, remove) the active metrics backend."""
        with self._lock:
            self._backend = backend
            self._resolved = True
        logger.info("Metrics backend set to %s", type(backend).__name__)

    def reset(self) -> None:
        """Forget the backend so the next call re-reads the settings."""
        with self._lock:
            self._backend = None
            self._resolved = False

    def _get_backend(self) -> BaseMetricsBackend | None:
        if self._resolved:
            return self._backend
        with self._lock:
            if not self._resolved:
                self._backend = self._load_from_settings()
                self._resolved = True
        return self._backend

    @staticmethod
    def _load_from_settings() -> BaseMetricsBackend | None:
        from importlib import import_module

        from byzsim.conf import sim_settings

        dotted = sim_settings.METRICS_BACKEND
        if not dotted:
            return None
        try:
            if dotted in _BUILTIN_BACKENDS:
                cls: Any = _BUILTIN_BACKENDS[dotted]
            else:
                module, _, attr = str(dotted).rpartition(".")
                cls = getattr(import_module(module), attr)
            return cls(namespace=sim_settings.METRICS_NAMESPACE)  # type: ignore[no-any-return]
        except Exception:
            logger.exception("Failed to load metrics backend '%s'", dotted)
            return None

    def _call(self, method: str, *args: Any) -> None:
        b = self._get_backend()
        if b is None:
            return
        try:
            getattr(b, method)(*args)
        except Exception:
            logger.debug("metrics.%s failed", method, exc_info=True)

    def increment(self, name: str, value: int = 1, labels: dict[str, str] | None = None) -> None:
        self._call("increment", name, value, labels)

    def gauge(self, name: str, value: float, labels: dict[str, str] | None = None) -> None:
        self._call("gauge", name, value, labels)

    def timing(self, name: str, value_ms: float, labels: dict[str, str] | None = None) -> None:
        self._call("timing", name, value_ms, labels)

    def histogram(self, name: str, value: float, labels: dict[str, str] | None = None) -> None:
        self._call("histogram", name, value, labels)

    def timer(self, name: str, labels: dict[str, str] | None = None) -> _Timer:
        """Context manager that records elapsed time."""
        return _Timer(self, name, labels)


class _Timer:
    """Context manager returned by metrics.timer()."""

    def __init__(self, m: Metrics, name: str, labels: dict[str, str] | None):
        self._m, self._name, self._labels = m, name, labels

    def __enter__(self) -> _Timer:
        self._start = time.perf_counter()
        return self

    def __exit__(self, *_: Any) -> None:
        elapsed_ms = (time.perf_counter() - self._start) * 1000
        self._m.timing(self._name, elapsed_ms, self._labels)


# ── Global singleton ──────────────────────────────────────────────────────
metrics = Metrics()


def track(name: str | None = None,
          labels: dict[str, str] | None = None) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
    """
    Decorator: record call count and execution time for a function.

    Example::

        @track("table")
        def run_table(config): ...
    """
    def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
        metric_name = name or f"{func.__module__}.{func.__qualname__}".replace(".", "_")

        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            metrics.increment(f"{metric_name}_calls", labels=labels)
            with metrics.timer(f"{metric_name}_duration_ms", labels=labels):
                return func(*args, **kwargs)
        return wrapper
    return decorator
