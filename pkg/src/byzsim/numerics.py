"""
byzsim.numerics
~~~~~~~~~~~~~~~
Standard-normal primitives, order statistics, small SPD linear algebra and
the seeded RNG contract shared by every other module.

All functions are pure and accept scalars or numpy arrays. Scalars in,
Python floats out.

    normal_cdf(x)          Φ(x) via scipy.special.ndtr
    normal_inv_cdf(tau)    Φ⁻¹(τ) via scipy.special.ndtri, antisymmetric by construction
    normal_pdf(x)          ψ(x) = e^{-x²/2}/√(2π)
    select_quantile(v, τ)  linear-interpolated order statistic via introselect
    cholesky(A)            lower factor via LAPACK potrf, failing pivot reported
    solve_spd(A, b)        Cholesky solve
    SeededRng              (master_seed, stream path) → numpy Generator
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, special

from byzsim.exceptions import DomainError, FactorizationError

FloatArray = NDArray[np.float64]

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
SPD_TOLERANCE = 1e-10


def _as_finite(x: ArrayLike, name: str) -> FloatArray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _unwrap(arr: FloatArray) -> Any:
    return float(arr) if arr.ndim == 0 else arr


# ── Standard normal ────────────────────────────────────────────────────────

def normal_cdf(x: ArrayLike) -> Any:
    """Φ(x) = P(N(0,1) ≤ x)."""
    return _unwrap(special.ndtr(_as_finite(x, "x")))


def normal_pdf(x: ArrayLike) -> Any:
    """ψ(x), the standard normal density."""
    arr = _as_finite(x, "x")
    return _unwrap(INV_SQRT_2PI * np.exp(-0.5 * arr * arr))


def normal_inv_cdf(tau: ArrayLike) -> Any:
    """
    Φ⁻¹(τ) for τ ∈ (0, 1).

    The upper half is computed as −Φ⁻¹(1−τ), so Φ⁻¹(1−τ) = −Φ⁻¹(τ) holds
    exactly whenever 1−τ is representable.
    """
    arr = np.asarray(tau, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("tau must lie strictly inside (0, 1)")
    out = np.where(arr > 0.5, -special.ndtri(1.0 - arr), special.ndtri(arr))
    return _unwrap(out)


# ── Order statistics ───────────────────────────────────────────────────────

def select_quantile(values: ArrayLike, tau: float, axis: int | None = None) -> Any:
    """
    The τ-quantile of *values*, linearly interpolated between order statistics.

    Position h = τ·(N−1): at τ = 1/2 this is the middle order statistic for
    odd N and the average of the two central ones for even N. Uses
    ``np.partition`` (introselect: quickselect with a median-of-medians
    fallback), so cost is linear in N. With ``axis`` set, selects along that
    axis of a 2-D array (coordinate-wise quantiles).
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("cannot select a quantile of an empty list")
    if np.isnan(arr).any():
        raise DomainError("values contain NaN")
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    if axis is None:
        arr, axis = arr.ravel(), 0

    h = tau * (arr.shape[axis] - 1)
    lo, hi = math.floor(h), math.ceil(h)
    kth = (lo,) if lo == hi else (lo, hi)
    part = np.partition(arr, kth, axis=axis)
    low = np.take(part, lo, axis=axis)
    if lo == hi:
        return _unwrap(low)
    high = np.take(part, hi, axis=axis)
    return _unwrap(low + (h - lo) * (high - low))


# ── Linear algebra ─────────────────────────────────────────────────────────

def cholesky(cov: ArrayLike) -> FloatArray:
    """
    Lower-triangular L with L·Lᵀ = cov.

    Raises FactorizationError naming the 0-based pivot where the matrix stops
    being positive definite (pivot² ≤ 1e-10 relative to the largest diagonal).
    """
    a = _as_finite(cov, "matrix")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > SPD_TOLERANCE * scale:
        raise DomainError("matrix is not symmetric")

    factor, info = linalg.lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise FactorizationError(
            f"matrix is not positive definite: pivot {info - 1} is non-positive",
            pivot=info - 1,
        )
    if info < 0:
        raise DomainError(f"potrf rejected argument {-info}")

    pivots = np.diag(factor) ** 2
    weak = np.flatnonzero(pivots <= SPD_TOLERANCE * float(np.max(np.abs(np.diag(a)))))
    if weak.size:
        raise FactorizationError(
            f"matrix is numerically singular at pivot {int(weak[0])}", pivot=int(weak[0])
        )
    return np.tril(factor)


def solve_spd(A: ArrayLike, b: ArrayLike) -> FloatArray:  # noqa: N803
    """Solve A·x = b for symmetric positive definite A."""
    rhs = _as_finite(b, "b")
    factor = cholesky(A)
    if rhs.shape[0] != factor.shape[0]:
        raise DomainError(f"dimension mismatch: A is {factor.shape}, b is {rhs.shape}")
    return np.asarray(linalg.cho_solve((factor, True), rhs), dtype=np.float64)


# ── Seeded random streams ──────────────────────────────────────────────────

@dataclass(frozen=True)
class SeededRng:
    """
    A named random stream: ``(master_seed, stream)`` → numpy Generator.

    Child seeds come from ``numpy.random.SeedSequence(master_seed,
    spawn_key=stream)``, so a given path yields the same stream no matter
    which other streams were created first or on which thread. The
    ``generator`` is created lazily and is stateful; give each consumer its
    own child instead of sharing one instance.
    """

    master_seed: int
    stream: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 2**64:
            raise DomainError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")

    def child(self, *stream_ids: int) -> SeededRng:
        return SeededRng(self.master_seed, self.stream + tuple(int(s) for s in stream_ids))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=self.stream)

    @cached_property
    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))
