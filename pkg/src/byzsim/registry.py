"""
byzsim.registry
~~~~~~~~~~~~~~~
Pluggable aggregator registry — the Aggr(·) slot of the RCSL update.

Any rule mapping the m+1 block summaries to one vector can be plugged in
without forking the simulator. The four built-ins (mean, mom, vrmom,
trimmed_mean) are registered by ``byzsim.aggregators`` on import.

Registering a custom aggregator::

    import numpy as np
    from byzsim.registry import aggregator_registry

    @aggregator_registry.register("midrange")
    def midrange(blocks, spec):
        return 0.5 * (blocks.means.min(axis=0) + blocks.means.max(axis=0))

    spec = AggregatorSpec(kind="midrange")
    aggregator_registry.aggregate(blocks, spec)
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import NDArray

from byzsim.events import AGGREGATOR_REGISTERED, event_bus
from byzsim.exceptions import ConfigError

if TYPE_CHECKING:
    from byzsim.aggregators import AggregatorSpec, BlockSummaries

logger = logging.getLogger("byzsim.registry")

AggregateFn = Callable[["BlockSummaries", "AggregatorSpec"], NDArray[np.float64]]


class AggregatorRegistry:
    """Name → aggregate function map with duplicate protection."""

    def __init__(self) -> None:
        self._aggregators: dict[str, AggregateFn] = {}

    # ── Registration ─────────────────────────────────────────────────────

    def register(self, name: str) -> Callable[[AggregateFn], AggregateFn]:
        """Decorator: register *fn* under *name*."""
        def decorator(fn: AggregateFn) -> AggregateFn:
            if name in self._aggregators:
                raise ConfigError(
                    f"An aggregator named '{name}' is already registered.", key="aggregator"
                )
            self._aggregators[name] = fn
            event_bus.emit(AGGREGATOR_REGISTERED, name=name)
            logger.debug("Aggregator '%s' registered", name)
            return fn
        return decorator

    def unregister(self, name: str) -> None:
        self._aggregators.pop(name, None)

    def get(self, name: str) -> AggregateFn:
        try:
            return self._aggregators[name]
        except KeyError:
            raise ConfigError(
                f"Unknown aggregator '{name}'. Registered: {', '.join(self.names)}",
                key="aggregator",
            ) from None

    @property
    def names(self) -> list[str]:
        return sorted(self._aggregators)

    # ── Dispatch ──────────────────────────────────────────────────────────

    def aggregate(self, blocks: BlockSummaries, spec: AggregatorSpec) -> NDArray[np.float64]:
        return self.get(spec.kind)(blocks, spec)

    def __contains__(self, name: object) -> bool:
        return name in self._aggregators

    def __len__(self) -> int:
        return len(self._aggregators)

    def __repr__(self) -> str:
        return f"<AggregatorRegistry [{', '.join(self.names)}]>"


# ── Global singleton ──────────────────────────────────────────────────────
aggregator_registry = AggregatorRegistry()
