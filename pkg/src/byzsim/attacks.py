"""
byzsim.attacks
~~~~~~~~~~~~~~
Byzantine failure models for the corrupted worker set B.

Attack kinds (CLI strings)::

    none         reports pass through unchanged
    gaussian     fresh N(0, gaussian_std²) entries every round, honest value ignored
    omniscient   −omniscient_scale · honest
    bitflip      sign of the first bitflip_dims coordinates flipped
    labelflip    responses Y ↦ 1 − Y before an honest gradient (logistic only)

The master (index 0) is never corrupted. ``gaussian_std`` defaults to √200,
i.e. the N(0, 200·I) payload is read as per-coordinate variance 200.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from byzsim.exceptions import ConfigError, DomainError
from byzsim.models import DataShard
from byzsim.numerics import FloatArray, SeededRng

logger = logging.getLogger("byzsim.attacks")

AttackKind = Literal["none", "gaussian", "omniscient", "bitflip", "labelflip"]


class AttackSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: AttackKind = "none"
    gaussian_std: float = Field(math.sqrt(200.0), gt=0.0)
    omniscient_scale: float = 1e10
    bitflip_dims: int = Field(5, ge=1)


@dataclass(frozen=True)
class ByzantineSet:
    """Corrupted worker indices, fixed for one replication; 0 never included."""

    indices: tuple[int, ...]
    alpha: float

    def __contains__(self, j: object) -> bool:
        return j in self.indices

    def __len__(self) -> int:
        return len(self.indices)

    def mask(self, machines: int) -> np.ndarray:
        """Boolean mask over machines 0..machines−1."""
        out = np.zeros(machines, dtype=bool)
        out[list(self.indices)] = True
        return out


def byzantine_count(m: int, alpha: float) -> int:
    # the 1e-9 keeps float products such as 0.29·100 = 28.999… on the intended integer
    return math.floor(alpha * m + 1e-9)


def sample_byzantine_set(m: int, alpha: float, rng: SeededRng) -> ByzantineSet:
    """Uniform ⌊α·m⌋-subset of workers 1..m."""
    if m < 1:
        raise ConfigError(f"worker count m must be >= 1, got {m}", key="m")
    if not 0.0 <= alpha < 0.5:
        raise ConfigError(f"alpha must lie in [0, 1/2), got {alpha}", key="alpha")
    size = byzantine_count(m, alpha)
    if size == 0:
        return ByzantineSet((), alpha)
    chosen = rng.generator.choice(np.arange(1, m + 1), size=size, replace=False)
    return ByzantineSet(tuple(sorted(int(j) for j in chosen)), alpha)


def corrupt_report(honest: ArrayLike, spec: AttackSpec, rng: SeededRng) -> FloatArray:
    """The message a Byzantine worker sends instead of *honest*."""
    vec = np.asarray(honest, dtype=np.float64)
    if spec.kind == "gaussian":
        return np.asarray(rng.generator.normal(0.0, spec.gaussian_std, size=vec.shape),
                          dtype=np.float64)
    if spec.kind == "omniscient":
        return -spec.omniscient_scale * vec
    if spec.kind == "bitflip":
        out = vec.copy()
        k = min(spec.bitflip_dims, out.shape[-1])
        out[..., :k] = -out[..., :k]
        return out
    # none, and labelflip (which acts on the shard instead)
    return vec.copy()


def corrupt_reports(reports: FloatArray, byz: ByzantineSet, spec: AttackSpec,
                    rng: SeededRng) -> FloatArray:
    """Replace the rows of *reports* owned by Byzantine workers; worker j uses stream j."""
    out = np.array(reports, dtype=np.float64, copy=True)
    for j in byz.indices:
        out[j] = corrupt_report(reports[j], spec, rng.child(j))
    return out


def _check_binary(Y: FloatArray) -> None:  # noqa: N803
    if not np.all((Y == 0.0) | (Y == 1.0)):
        raise DomainError("label flipping needs binary {0, 1} responses")


def label_flip_shard(shard: DataShard) -> DataShard:
    """Y ↦ 1 − Y with X unchanged."""
    _check_binary(shard.Y)
    return DataShard(shard.X, 1.0 - shard.Y)


def label_flip_responses(Y: FloatArray, byz: ByzantineSet) -> FloatArray:  # noqa: N803
    """Stacked (m+1, n) responses with the Byzantine rows flipped."""
    if not len(byz):
        return Y
    out = np.array(Y, dtype=np.float64, copy=True)
    rows = list(byz.indices)
    _check_binary(out[rows])
    out[rows] = 1.0 - out[rows]
    return out
