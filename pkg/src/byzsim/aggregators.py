"""
byzsim.aggregators
~~~~~~~~~~~~~~~~~~
Coordinate-wise robust aggregation of per-machine vectors.

    mean_aggregate           arithmetic mean (not robust; classical CSL)
    mom_aggregate            coordinate median of block means
    vrmom_aggregate          median plus a one-step correction from K quantile levels
    trimmed_mean_aggregate   mean of the central order statistics

VRMOM, per coordinate l::

    μ̄_l = μ̂_l − σ̂_l / ((m+1)·√n·S_ψ) · Σ_j [K/2 + 1 − ⌈(K+1)·Φ(z_j)⌉]
    z_j = √n·(X̄_{j,l} − μ̂_l)/σ̂_l,   S_ψ = Σ_k ψ(Φ⁻¹(k/(K+1)))

The master block (index 0) takes part in the median and in the sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import special, stats

from byzsim.exceptions import ConfigError, DomainError
from byzsim.numerics import FloatArray, normal_inv_cdf, normal_pdf, select_quantile
from byzsim.registry import aggregator_registry

SIGMA_FLOOR = 1e-12
PHI_CLAMP = 1e-16

_ALIASES = {"trimmed-mean": "trimmed_mean", "trimmed": "trimmed_mean", "median": "mom"}


@lru_cache(maxsize=64)
def vrmom_constants(K: int) -> tuple[FloatArray, float]:  # noqa: N803
    """(Δ_k for k = 1..K, S_ψ = Σ ψ(Δ_k)), computed once per K."""
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}", key="K")
    deltas = np.asarray(normal_inv_cdf(np.arange(1, K + 1) / (K + 1)), dtype=np.float64)
    deltas.setflags(write=False)
    return deltas, float(np.sum(normal_pdf(deltas)))


class AggregatorSpec(BaseModel):
    """Which aggregator to apply, with its tuning constants."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: str = "vrmom"
    K: int = Field(10, ge=1)
    beta: float = Field(0.1, ge=0.0, lt=0.5)

    @field_validator("kind")
    @classmethod
    def _normalise_kind(cls, v: str) -> str:
        v = v.strip().lower()
        return _ALIASES.get(v, v)

    @property
    def deltas(self) -> FloatArray:
        return vrmom_constants(self.K)[0]

    @property
    def psi_sum(self) -> float:
        return vrmom_constants(self.K)[1]

    @property
    def label(self) -> str:
        if self.kind == "vrmom":
            return f"vrmom(K={self.K})"
        if self.kind == "trimmed_mean":
            return f"trimmed_mean(beta={self.beta:g})"
        return self.kind


@dataclass(frozen=True)
class BlockSummaries:
    """
    Per-machine vectors to aggregate.

    ``means[0]`` is the master block, ``means[1:]`` the workers (possibly
    corrupted). ``sigma_hat`` holds the master block's per-coordinate
    standard deviations; only VRMOM reads it.
    """

    means: FloatArray
    sigma_hat: FloatArray | None = None
    n: int = 1

    def __post_init__(self) -> None:
        try:
            means = np.asarray(self.means, dtype=np.float64)
        except ValueError as exc:
            raise DomainError(f"dimension mismatch among block vectors: {exc}") from exc
        if means.ndim == 1:
            means = means[:, None]
        if means.ndim != 2 or means.shape[0] == 0:
            raise DomainError(f"expected a non-empty (m+1, p) array, got shape {means.shape}")
        if np.isnan(means).any():
            raise DomainError("block vectors contain NaN")
        object.__setattr__(self, "means", means)

        if self.sigma_hat is not None:
            sigma = np.atleast_1d(np.asarray(self.sigma_hat, dtype=np.float64))
            if sigma.shape != (means.shape[1],):
                raise DomainError(
                    f"sigma_hat has shape {sigma.shape}, expected ({means.shape[1]},)"
                )
            if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
                raise DomainError("sigma_hat entries must be finite and >= 0")
            object.__setattr__(self, "sigma_hat", sigma)
        if self.n < 1:
            raise DomainError(f"block size n must be >= 1, got {self.n}")

    @classmethod
    def from_vectors(cls, vectors: list[ArrayLike], sigma_hat: ArrayLike | None = None,
                     n: int = 1) -> BlockSummaries:
        dims = {np.atleast_1d(np.asarray(v)).shape for v in vectors}
        if len(dims) > 1:
            raise DomainError(f"dimension mismatch among block vectors: {sorted(dims)}")
        return cls(np.asarray(vectors, dtype=np.float64),
                   None if sigma_hat is None else np.asarray(sigma_hat, dtype=np.float64), n)

    @property
    def count(self) -> int:
        return int(self.means.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])


# ── Aggregators ───────────────────────────────────────────────────────────

def mean_aggregate(blocks: BlockSummaries) -> FloatArray:
    return np.asarray(blocks.means.mean(axis=0), dtype=np.float64)


def mom_aggregate(blocks: BlockSummaries) -> FloatArray:
    return np.atleast_1d(np.asarray(select_quantile(blocks.means, 0.5, axis=0), dtype=np.float64))


def _summands(z: FloatArray, K: int) -> FloatArray:  # noqa: N803
    phi = np.clip(special.ndtr(z), PHI_CLAMP, 1.0 - PHI_CLAMP)
    return np.asarray(K / 2.0 + 1.0 - np.ceil((K + 1) * phi), dtype=np.float64)


def vrmom_correction_summand(z: ArrayLike, K: int) -> Any:  # noqa: N803
    """K/2 + 1 − ⌈(K+1)·Φ(z)⌉, always within [−K/2, K/2]."""
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}", key="K")
    arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("z must be finite")
    out = _summands(arr, K)
    return float(out) if out.ndim == 0 else out


def vrmom_aggregate(blocks: BlockSummaries, spec: AggregatorSpec) -> FloatArray:
    """
    Coordinate-wise VRMOM. Coordinates with σ̂_l ≤ SIGMA_FLOOR return the
    plain median; the correction is bounded by (K/2)·σ̂_l/√n.
    """
    if spec.K < 1:
        raise ConfigError(f"K must be >= 1, got {spec.K}", key="K")
    if blocks.sigma_hat is None:
        raise DomainError("vrmom needs the master block's sigma_hat")

    median = mom_aggregate(blocks)
    active = blocks.sigma_hat > SIGMA_FLOOR
    sigma = np.where(active, blocks.sigma_hat, 1.0)
    root_n = math.sqrt(blocks.n)

    z = root_n * (blocks.means - median) / sigma
    total = _summands(z, spec.K).sum(axis=0)
    correction = sigma / (blocks.count * root_n * spec.psi_sum) * total
    return np.asarray(np.where(active, median - correction, median), dtype=np.float64)


def trimmed_mean_aggregate(blocks: BlockSummaries, beta: float) -> FloatArray:
    """Drop ⌊β·(m+1)⌋ values from each tail per coordinate, average the rest."""
    if not 0.0 <= beta < 0.5:
        raise ConfigError(f"trim fraction beta must lie in [0, 1/2), got {beta}", key="beta")
    return np.atleast_1d(np.asarray(stats.trim_mean(blocks.means, beta, axis=0),
                                    dtype=np.float64))


def block_sigma_hat(master_shard_gradients: ArrayLike) -> FloatArray:
    """Per-coordinate standard deviation with 1/n normalisation."""
    arr = np.asarray(master_shard_gradients, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("block_sigma_hat needs at least one vector")
    if arr.ndim == 1:
        arr = arr[:, None]
    return np.asarray(arr.std(axis=0), dtype=np.float64)


def aggregate(blocks: BlockSummaries, spec: AggregatorSpec) -> FloatArray:
    """Dispatch on ``spec.kind`` through the aggregator registry."""
    return aggregator_registry.aggregate(blocks, spec)


# ── Built-in registrations ────────────────────────────────────────────────

@aggregator_registry.register("mean")
def _mean(blocks: BlockSummaries, spec: AggregatorSpec) -> FloatArray:
    return mean_aggregate(blocks)


@aggregator_registry.register("mom")
def _mom(blocks: BlockSummaries, spec: AggregatorSpec) -> FloatArray:
    return mom_aggregate(blocks)


@aggregator_registry.register("vrmom")
def _vrmom(blocks: BlockSummaries, spec: AggregatorSpec) -> FloatArray:
    return vrmom_aggregate(blocks, spec)


@aggregator_registry.register("trimmed_mean")
def _trimmed(blocks: BlockSummaries, spec: AggregatorSpec) -> FloatArray:
    return trimmed_mean_aggregate(blocks, spec.beta)
