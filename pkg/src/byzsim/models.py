"""
byzsim.models
~~~~~~~~~~~~~
Loss functions, gradients and local solvers for the RCSL master.

Supported models (average loss over a shard of n rows):

    linear     (y − xᵀθ)²                            gradient  n⁻¹ Σ 2x(xᵀθ − y)
    logistic   log(1 + e^{xᵀθ}) − y·xᵀθ              gradient  n⁻¹ Σ x(L(xᵀθ) − y)
    huber      ρ_δ(y − xᵀθ)                          gradient  −n⁻¹ Σ x·clip(y − xᵀθ, ±δ)

The surrogate problem minimises ``loss(θ) − ⟨shift, θ⟩``; its optimum
satisfies ∇loss(θ̂) = shift. Linear has a closed form; logistic and Huber
use damped Newton with step halving.

The gradient helpers accept arrays with leading batch dimensions, so the
simulator evaluates all m+1 machines in one call.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field
from scipy import special

from byzsim.exceptions import DomainError, FactorizationError, SolverError
from byzsim.numerics import FloatArray, solve_spd

logger = logging.getLogger("byzsim.models")

GRADIENT_TOL = 1e-8
MAX_NEWTON_ITER = 200
MAX_HALVINGS = 40
HUBER_RIDGE = 1e-10
NEWTON_RIDGES = (1e-8, 1e-6, 1e-4, 1e-2, 1.0)
DEFAULT_HUBER_DELTA = 1.345

ModelKind = Literal["linear", "logistic", "huber"]


class ModelSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ModelKind = "linear"
    p: int = Field(30, ge=1)
    huber_delta: float = Field(DEFAULT_HUBER_DELTA, gt=0.0)


@dataclass(frozen=True)
class DataShard:
    """One machine's data: covariates X (n × p) and responses Y (n,)."""

    X: FloatArray
    Y: FloatArray

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)  # noqa: N806
        Y = np.asarray(self.Y, dtype=np.float64)  # noqa: N806
        if X.ndim == 1:
            X = X[:, None]  # noqa: N806
        if X.ndim != 2 or Y.shape != (X.shape[0],):
            raise DomainError(f"shard shapes disagree: X {X.shape}, Y {Y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DomainError("shard entries must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])


@dataclass(frozen=True)
class SurrogateProblem:
    """The master's tilted local problem: minimise loss(θ) − ⟨shift, θ⟩."""

    shard: DataShard
    model: ModelSpec
    shift: FloatArray

    def __post_init__(self) -> None:
        shift = np.asarray(self.shift, dtype=np.float64)
        if shift.shape != (self.shard.p,):
            raise DomainError(f"shift has shape {shift.shape}, expected ({self.shard.p},)")
        if not np.all(np.isfinite(shift)):
            raise DomainError("shift must be finite")
        object.__setattr__(self, "shift", shift)


def _check(model: ModelSpec, X: FloatArray, theta: ArrayLike) -> FloatArray:  # noqa: N803
    th = np.asarray(theta, dtype=np.float64)
    if th.shape != (X.shape[-1],):
        raise DomainError(f"theta has shape {th.shape}, covariates have {X.shape[-1]} columns")
    if model.p != X.shape[-1]:
        raise DomainError(f"model dimension {model.p} != covariate dimension {X.shape[-1]}")
    return th


# ── Per-sample scores ─────────────────────────────────────────────────────

def _residual_weights(model: ModelSpec, X: FloatArray, Y: FloatArray,  # noqa: N803
                      theta: FloatArray) -> FloatArray:
    """w_i such that ∇f(x_i, θ) = w_i·x_i."""
    u = X @ theta
    if model.kind == "linear":
        return 2.0 * (u - Y)
    if model.kind == "logistic":
        return special.expit(u) - Y
    return -np.clip(Y - u, -model.huber_delta, model.huber_delta)


def stacked_gradients(model: ModelSpec, X: FloatArray, Y: FloatArray,  # noqa: N803
                      theta: ArrayLike) -> FloatArray:
    """Average gradient per shard for X of shape (..., n, p); returns (..., p)."""
    th = _check(model, X, theta)
    w = _residual_weights(model, X, Y, th)
    return np.asarray(np.einsum("...ij,...i->...j", X, w) / X.shape[-2], dtype=np.float64)


def gradient(model: ModelSpec, shard: DataShard, theta: ArrayLike) -> FloatArray:
    """n⁻¹ Σ ∇f(X_i, θ) over the shard."""
    return stacked_gradients(model, shard.X, shard.Y, theta)


def per_sample_gradients(model: ModelSpec, shard: DataShard, theta: ArrayLike) -> FloatArray:
    """The n × p matrix of individual gradients ∇f(X_i, θ)."""
    th = _check(model, shard.X, theta)
    return np.asarray(_residual_weights(model, shard.X, shard.Y, th)[:, None] * shard.X,
                      dtype=np.float64)


def loss_value(model: ModelSpec, shard: DataShard, theta: ArrayLike) -> float:
    th = _check(model, shard.X, theta)
    u = shard.X @ th
    if model.kind == "linear":
        return float(np.mean((shard.Y - u) ** 2))
    if model.kind == "logistic":
        return float(np.mean(np.logaddexp(0.0, u) - shard.Y * u))
    return float(np.mean(special.huber(model.huber_delta, shard.Y - u)))


def hessian(model: ModelSpec, shard: DataShard, theta: ArrayLike) -> FloatArray:
    """Average Hessian; Huber uses indicator weights plus a tiny ridge."""
    th = _check(model, shard.X, theta)
    X = shard.X  # noqa: N806
    if model.kind == "linear":
        w = np.full(shard.n, 2.0)
    elif model.kind == "logistic":
        s = special.expit(X @ th)
        w = s * (1.0 - s)
    else:
        w = (np.abs(shard.Y - X @ th) <= model.huber_delta).astype(np.float64)
    H = (X.T * w) @ X / shard.n  # noqa: N806
    if model.kind == "huber":
        H += HUBER_RIDGE * np.eye(shard.p)
    return np.asarray(H, dtype=np.float64)


# ── Solvers ───────────────────────────────────────────────────────────────

def _newton_direction(H: FloatArray, grad: FloatArray, theta: FloatArray,  # noqa: N803
                      residual: float) -> FloatArray:
    """H⁻¹·grad, adding a growing ridge while H is numerically singular."""
    try:
        return solve_spd(H, grad)
    except FactorizationError as exc:
        failure = exc
    scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    eye = np.eye(H.shape[0])
    for ridge in NEWTON_RIDGES:
        try:
            return solve_spd(H + ridge * scale * eye, grad)
        except FactorizationError as exc:
            failure = exc
    raise SolverError(
        f"Newton system stayed singular after ridge {NEWTON_RIDGES[-1]:g}: {failure}",
        last_iterate=theta, residual_norm=residual,
    ) from failure


def _damped_newton(problem: SurrogateProblem, theta0: FloatArray) -> FloatArray:
    model, shard, shift = problem.model, problem.shard, problem.shift

    def objective(th: FloatArray) -> float:
        return loss_value(model, shard, th) - float(shift @ th)

    theta = theta0.copy()
    value = objective(theta)
    residual = np.inf
    for it in range(MAX_NEWTON_ITER):
        grad = gradient(model, shard, theta) - shift
        residual = float(np.max(np.abs(grad)))
        if residual <= GRADIENT_TOL:
            logger.debug("newton converged", extra={"newton_iterations": it, "residual": residual})
            return theta
        step = _newton_direction(hessian(model, shard, theta), grad, theta, residual)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = theta - t * step
            cand_value = objective(candidate)
            if cand_value <= value + 1e-12 * max(1.0, abs(value)):
                break
            t *= 0.5
        else:
            raise SolverError(
                f"{model.kind} Newton line search failed to decrease the objective",
                last_iterate=theta, residual_norm=residual,
            )
        theta, value = candidate, cand_value

    raise SolverError(
        f"{model.kind} Newton solver did not converge in {MAX_NEWTON_ITER} iterations",
        last_iterate=theta, residual_norm=residual,
    )


def surrogate_minimize(problem: SurrogateProblem, theta0: ArrayLike | None = None) -> FloatArray:
    """
    argmin_θ { loss(θ) − ⟨shift, θ⟩ }.

    Linear uses the closed form (2n⁻¹Σxxᵀ)⁻¹(2n⁻¹Σxy + shift); the others
    start Newton from *theta0* (zeros by default).
    """
    shard = problem.shard
    if problem.model.p != shard.p:
        raise DomainError(f"model dimension {problem.model.p} != shard dimension {shard.p}")
    if problem.model.kind == "linear":
        gram = 2.0 * shard.X.T @ shard.X / shard.n
        rhs = 2.0 * shard.X.T @ shard.Y / shard.n + problem.shift
        return solve_spd(gram, rhs)
    start = np.zeros(shard.p) if theta0 is None else np.asarray(theta0, dtype=np.float64)
    return _damped_newton(problem, start)


def local_erm(model: ModelSpec, shard: DataShard) -> FloatArray:
    """θ̂⁽⁰⁾ = argmin n⁻¹ Σ f(X_i, θ) on one shard."""
    return surrogate_minimize(SurrogateProblem(shard, model, np.zeros(shard.p)))
