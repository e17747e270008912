"""
byzsim.conf
~~~~~~~~~~~
Centralised settings proxy with safe defaults and lazy loading.

All keys are optional — defaults work out of the box. Values are resolved
once and cached; call ``sim_settings.reload()`` after changing the
environment or calling ``configure()``.

Precedence (lowest → highest)::

    DEFAULTS  →  configure(**overrides)  →  environment variables

Full reference::

    THREADS            BYZSIM_THREADS      cap on parallel replications (default: CPU count)
    LOG_FORMAT         BYZSIM_LOG_FORMAT   "verbose" | "json"
    LOG_LEVEL          BYZSIM_LOG_LEVEL    "INFO"
    METRICS_BACKEND    BYZSIM_METRICS      None | "logging" | "prometheus" | dotted path
    METRICS_NAMESPACE  —                   "byzsim"
"""

from __future__ import annotations

import os
from typing import Any

from byzsim.exceptions import ConfigError

DEFAULTS: dict[str, Any] = {
    "THREADS":           None,       # None → os.cpu_count()
    "LOG_FORMAT":        "verbose",
    "LOG_LEVEL":         "INFO",
    "METRICS_BACKEND":   None,
    "METRICS_NAMESPACE": "byzsim",
}

_ENV = {
    "THREADS":         "BYZSIM_THREADS",
    "LOG_FORMAT":      "BYZSIM_LOG_FORMAT",
    "LOG_LEVEL":       "BYZSIM_LOG_LEVEL",
    "METRICS_BACKEND": "BYZSIM_METRICS",
}


class SimSettings:
    """Lazy proxy over DEFAULTS, programmatic overrides and the environment."""

    def __init__(self) -> None:
        self._overrides: dict[str, Any] = {}
        self._cache: dict[str, Any] = {}

    def configure(self, **overrides: Any) -> None:
        """Set programmatic overrides (tests, embedding code)."""
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"Unknown setting(s): {sorted(unknown)}", key=sorted(unknown)[0])
        self._overrides.update(overrides)
        self._cache.clear()

    def get(self, key: str, default: Any = None) -> Any:
        """Return the raw resolved value for *key*."""
        if key not in self._cache:
            env_name = _ENV.get(key)
            if env_name and os.environ.get(env_name):
                value: Any = os.environ[env_name]
            elif key in self._overrides:
                value = self._overrides[key]
            else:
                value = DEFAULTS.get(key, default)
            self._cache[key] = value
        return self._cache[key]

    @property
    def THREADS(self) -> int:  # noqa: N802
        raw = self.get("THREADS")
        cpus = os.cpu_count() or 1
        if raw is None:
            return cpus
        try:
            threads = int(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"THREADS must be an integer, got {raw!r}", key="THREADS") from exc
        if threads < 1:
            raise ConfigError(f"THREADS must be >= 1, got {threads}", key="THREADS")
        return min(threads, cpus)

    @property
    def LOG_FORMAT(self) -> str:  # noqa: N802
        fmt = str(self.get("LOG_FORMAT")).lower()
        if fmt not in ("json", "verbose"):
            raise ConfigError(f"LOG_FORMAT must be 'json' or 'verbose', got {fmt!r}",
                              key="LOG_FORMAT")
        return fmt

    @property
    def LOG_LEVEL(self) -> str:  # noqa: N802
        return str(self.get("LOG_LEVEL")).upper()

    @property
    def METRICS_BACKEND(self) -> str | None:  # noqa: N802
        return self.get("METRICS_BACKEND")

    @property
    def METRICS_NAMESPACE(self) -> str:  # noqa: N802
        return str(self.get("METRICS_NAMESPACE"))

    def reload(self) -> None:
        """Clear the resolution cache and overrides."""
        self._cache.clear()
        self._overrides.clear()


sim_settings = SimSettings()
