"""
byzsim.analysis
~~~~~~~~~~~~~~~
Asymptotic quantities of the VRMOM aggregator.

    sigma_K_squared        σ_K² = Σ min(τ)(1 − max τ) / S_ψ² · σ²
    efficiency_report      σ²/σ_K² against the MOM (2/π) and K → ∞ (3/π) constants
    bivariate_normal_cdf   Φ₂(x, y; ρ) by Owen's T-function formula
    c_matrix_entry         off-diagonal entry of the VRMOM limiting covariance
    c_mom_entry            the same entry for MOM
    c_limit_entry          the K → ∞ limit of c_matrix_entry (quadrature)
    h_phi                  (C_MOM − C_∞)/π at ρ = sin φ, unit variances
    gap_matrix             the 2 × 2 matrix C_MOM − C_∞ at ρ = sin φ
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, special

from byzsim.aggregators import vrmom_constants
from byzsim.exceptions import ConfigError, DomainError, QuadratureError
from byzsim.numerics import FloatArray, normal_pdf

MOM_EFFICIENCY = 2.0 / math.pi
LIMIT_EFFICIENCY = 3.0 / math.pi
PERFECT_CORRELATION = 1.0 - 1e-12
QUAD_BOUND = 8.0
QUAD_TOL = 1e-9
QUAD_REQUIRED = 1e-5


@dataclass(frozen=True)
class EfficiencyReport:
    K: int
    sigma_K_sq_over_sigma_sq: float
    efficiency: float
    mom_efficiency: float = MOM_EFFICIENCY
    limit_efficiency: float = LIMIT_EFFICIENCY


class CovEntryInputs(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rho: float = Field(ge=-1.0, le=1.0)
    sigma_pair: tuple[float, float] = (1.0, 1.0)
    K: int = Field(10, ge=1)

    @property
    def scale(self) -> float:
        s1, s2 = self.sigma_pair
        if s1 <= 0 or s2 <= 0:
            raise DomainError(f"variances must be positive, got {self.sigma_pair}")
        return math.sqrt(s1 * s2)


def _levels(K: int) -> FloatArray:  # noqa: N803
    return np.arange(1, K + 1) / (K + 1)


def sigma_K_squared(K: int, sigma_sq: float = 1.0) -> float:  # noqa: N802, N803
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}", key="K")
    if sigma_sq <= 0:
        raise DomainError(f"sigma_sq must be positive, got {sigma_sq}")
    tau = _levels(K)
    lo = np.minimum.outer(tau, tau)
    hi = np.maximum.outer(tau, tau)
    _, psi_sum = vrmom_constants(K)
    return float(np.sum(lo * (1.0 - hi)) / psi_sum**2 * sigma_sq)


def efficiency_report(K: int) -> EfficiencyReport:  # noqa: N803
    ratio = sigma_K_squared(K, 1.0)
    return EfficiencyReport(K=K, sigma_K_sq_over_sigma_sq=ratio, efficiency=1.0 / ratio)


# ── Bivariate normal ──────────────────────────────────────────────────────

def _owen(h: FloatArray, k: FloatArray, rho: float) -> FloatArray:
    """Φ₂ for finite h, k and |ρ| < 1."""
    s = math.sqrt(1.0 - rho * rho)
    h_zero, k_zero = h == 0.0, k == 0.0
    a_h = (k - rho * h) / (np.where(h_zero, 1.0, h) * s)
    a_k = (h - rho * k) / (np.where(k_zero, 1.0, k) * s)
    t_h = np.where(h_zero, 0.25 * np.sign(k), special.owens_t(h, a_h))
    t_k = np.where(k_zero, 0.25 * np.sign(h), special.owens_t(k, a_k))
    hk = h * k
    delta = np.where((hk > 0) | ((hk == 0) & (h + k >= 0)), 0.0, 0.5)
    out = 0.5 * (special.ndtr(h) + special.ndtr(k)) - t_h - t_k - delta
    return np.asarray(
        np.where(h_zero & k_zero, 0.25 + math.asin(rho) / (2.0 * math.pi), out),
        dtype=np.float64,
    )


def bivariate_normal_cdf(x: ArrayLike, y: ArrayLike, rho: float) -> Any:
    """
    P(Z₁ ≤ x, Z₂ ≤ y) for standard normals with correlation ρ.

    Infinite arguments reduce to the marginal (or 0). |ρ| within 1e-12 of 1
    uses the degenerate forms Φ(min(x, y)) and max(0, Φ(x) + Φ(y) − 1).
    """
    if not -1.0 - 1e-12 <= rho <= 1.0 + 1e-12 or math.isnan(rho):
        raise DomainError(f"correlation must lie in [-1, 1], got {rho}")
    h, k = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    if np.isnan(h).any() or np.isnan(k).any():
        raise DomainError("arguments contain NaN")

    h_fin = np.where(np.isfinite(h), h, 0.0)
    k_fin = np.where(np.isfinite(k), k, 0.0)
    if rho >= PERFECT_CORRELATION:
        core = special.ndtr(np.minimum(h_fin, k_fin))
    elif rho <= -PERFECT_CORRELATION:
        core = np.maximum(0.0, special.ndtr(h_fin) + special.ndtr(k_fin) - 1.0)
    else:
        core = _owen(h_fin, k_fin, rho)

    out = np.where(np.isposinf(h), special.ndtr(k), core)
    out = np.where(np.isposinf(k), special.ndtr(h), out)
    out = np.where(np.isneginf(h) | np.isneginf(k), 0.0, out)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else np.asarray(out, dtype=np.float64)


# ── Limiting covariance entries ───────────────────────────────────────────

def c_matrix_entry(inputs: CovEntryInputs) -> float:
    """Σ_{k1,k2} (Φ₂(Δ_k1, Δ_k2; ρ) − τ_k1·τ_k2) / S_ψ² · √(σ₁σ₂)."""
    deltas, psi_sum = vrmom_constants(inputs.K)
    tau = _levels(inputs.K)
    d1, d2 = np.meshgrid(deltas, deltas, indexing="ij")
    joint = bivariate_normal_cdf(d1, d2, inputs.rho)
    return float(np.sum(joint - np.outer(tau, tau)) / psi_sum**2 * inputs.scale)


def c_mom_entry(rho: float, sigma_pair: tuple[float, float] = (1.0, 1.0)) -> float:
    """(2π·Φ₂(0, 0; ρ) − π/2)·√(σ₁σ₂); equals arcsin(ρ)·√(σ₁σ₂)."""
    scale = CovEntryInputs(rho=rho, sigma_pair=sigma_pair).scale
    return (2.0 * math.pi * bivariate_normal_cdf(0.0, 0.0, rho) - 0.5 * math.pi) * scale


def c_limit_entry(rho: float, sigma_pair: tuple[float, float] = (1.0, 1.0)) -> float:
    """
    lim_{K→∞} c_matrix_entry = (4π·I − π)·√(σ₁σ₂), I = ∫∫ψ(y₁)ψ(y₂)Φ₂(y₁, y₂; ρ).

    Integrating y₂ out in closed form leaves I = ∫ψ(y)·Φ₂(y, 0; ρ/√2) dy,
    evaluated by adaptive quadrature on [−8, 8]. Raises QuadratureError when
    the reported error exceeds 1e-5.
    """
    scale = CovEntryInputs(rho=rho, sigma_pair=sigma_pair).scale
    inner = rho / math.sqrt(2.0)

    def integrand(y: float) -> float:
        return float(normal_pdf(y) * bivariate_normal_cdf(y, 0.0, inner))

    value, abserr = integrate.quad(integrand, -QUAD_BOUND, QUAD_BOUND,
                                   epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    if not abserr <= QUAD_REQUIRED:
        raise QuadratureError(
            f"quadrature for rho={rho} reached only {abserr:.2e}", achieved_tolerance=abserr
        )
    return (4.0 * math.pi * value - math.pi) * scale


def _check_angle(phi: float) -> None:
    if not abs(phi) <= 0.5 * math.pi + 1e-12:
        raise DomainError(f"phi must lie in [-pi/2, pi/2], got {phi}")


def h_phi(phi: float) -> float:
    _check_angle(phi)
    rho = max(-1.0, min(1.0, math.sin(phi)))
    return (c_mom_entry(rho) - c_limit_entry(rho)) / math.pi


def gap_matrix(phi: float) -> FloatArray:
    """C_MOM − C_∞ for two unit-variance coordinates with correlation sin φ."""
    _check_angle(phi)
    diagonal = c_mom_entry(1.0) - c_limit_entry(1.0)
    off = math.pi * h_phi(phi)
    return np.array([[diagonal, off], [off, diagonal]], dtype=np.float64)


def phi_grid(points: int = 181) -> FloatArray:
    """Evenly spaced angles covering [−π/2, π/2]."""
    if points < 2:
        raise ConfigError(f"grid needs at least 2 points, got {points}", key="points")
    return np.linspace(-0.5 * math.pi, 0.5 * math.pi, points)
