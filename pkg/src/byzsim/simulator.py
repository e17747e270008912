"""
byzsim.simulator
~~~~~~~~~~~~~~~~
Simulated master/worker topology, synthetic data, the RCSL driver and the
Monte Carlo replication engine.

One replication::

    rng_r = rng.child(r)
    ├── child(0)  synthetic data for all m+1 machines
    ├── child(1)  the Byzantine set B
    └── child(2)  attack payloads, then .child(t).child(j) per round and worker

Because every replication owns its stream, results do not depend on how
the thread pool schedules work, and an aggregator run and its baseline run
see the same data, the same B and the same attack draws.
"""

from __future__ import annotations

import contextvars
import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg, special

from byzsim.aggregators import AggregatorSpec, BlockSummaries, aggregate, block_sigma_hat
from byzsim.attacks import (
    AttackSpec,
    ByzantineSet,
    corrupt_reports,
    label_flip_responses,
    sample_byzantine_set,
)
from byzsim.conf import sim_settings
from byzsim.events import (
    RCSL_NONCONVERGED,
    REPLICATION_COMPLETED,
    REPLICATION_FAILED,
    event_bus,
)
from byzsim.exceptions import ByzsimError, ConfigError, DomainError, SimulationError, SolverError
from byzsim.logging_structured import bind_run_context
from byzsim.metrics import metrics
from byzsim.models import (
    DataShard,
    ModelKind,
    ModelSpec,
    SurrogateProblem,
    local_erm,
    per_sample_gradients,
    stacked_gradients,
    surrogate_minimize,
)
from byzsim.numerics import FloatArray, SeededRng, cholesky

logger = logging.getLogger("byzsim.simulator")

Mode = Literal["mean", "rcsl"]
RmseKind = Literal["mean-norm", "root-mean-square"]

DATA_STREAM = 0
BYZANTINE_STREAM = 1
ATTACK_STREAM = 2


def theta_star(p: int) -> FloatArray:
    """p^{-1/2}·(1, (p−2)/(p−1), …, 1/(p−1), 0); (1) when p = 1."""
    if p < 1:
        raise ConfigError(f"dimension p must be >= 1, got {p}", key="p")
    return np.asarray(np.linspace(1.0, 0.0, p) / math.sqrt(p), dtype=np.float64)


# ── Specs ─────────────────────────────────────────────────────────────────

class SyntheticSpec(BaseModel):
    """
    How synthetic shards are drawn.

    ``model=None`` means mean estimation: raw vectors X ~ N(θ*, Σ) with
    identity Σ unless ``covariance`` says otherwise. Regression data use
    X ~ N(μ_x·1, Σ) with Toeplitz Σ by default and responses from θ*.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: ModelKind | None = None
    p: int = Field(30, ge=1)
    mu_x: float = 0.0
    covariance: Literal["identity", "toeplitz"] | None = None
    toeplitz_rho: float = Field(0.5, gt=-1.0, lt=1.0)
    noise: Literal["normal", "student_t"] = "normal"
    noise_df: float = Field(3.0, gt=0.0)
    huber_delta: float = Field(1.345, gt=0.0)

    @property
    def model_spec(self) -> ModelSpec:
        if self.model is None:
            raise ConfigError("mean-estimation data has no regression model", key="model")
        return ModelSpec(kind=self.model, p=self.p, huber_delta=self.huber_delta)

    @property
    def resolved_covariance(self) -> str:
        if self.covariance is not None:
            return self.covariance
        return "identity" if self.model is None else "toeplitz"

    def covariance_matrix(self) -> FloatArray:
        if self.resolved_covariance == "identity":
            return np.eye(self.p)
        return np.asarray(linalg.toeplitz(self.toeplitz_rho ** np.arange(self.p)),
                          dtype=np.float64)


class StoppingRule(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["tolerance", "fixed"] = "tolerance"
    iterations: int = Field(10, ge=0)
    tol: float = Field(1e-4, gt=0.0)
    max_iterations: int = Field(50, ge=1)

    @property
    def budget(self) -> int:
        return self.iterations if self.kind == "fixed" else self.max_iterations

    @property
    def label(self) -> str:
        return f"fixed(T={self.iterations})" if self.kind == "fixed" else f"tol({self.tol:g})"


class ReplicationConfig(BaseModel):
    """One grid cell: everything ``run_replications`` needs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Mode = "mean"
    data: SyntheticSpec = Field(default_factory=SyntheticSpec)
    aggregator: AggregatorSpec = Field(default_factory=AggregatorSpec)
    attack: AttackSpec = Field(default_factory=AttackSpec)
    m: int = Field(100, ge=1)
    n: int = Field(1000, ge=1)
    alpha: float = Field(0.0, ge=0.0, lt=0.5)
    reps: int = Field(500, ge=1)
    stop: StoppingRule = Field(default_factory=StoppingRule)
    rmse: RmseKind = "mean-norm"

    @model_validator(mode="after")
    def _check_combination(self) -> ReplicationConfig:
        if self.mode == "rcsl" and self.data.model is None:
            raise ValueError("rcsl mode needs a regression model")
        if self.mode == "mean" and self.data.model is not None:
            raise ValueError("mean mode takes no regression model")
        if self.attack.kind == "labelflip" and self.data.model != "logistic":
            raise ValueError("labelflip attack requires the logistic model")
        return self

    @property
    def cell(self) -> str:
        return (f"p={self.data.p},K={self.aggregator.K},"
                f"alpha={self.alpha:g},attack={self.attack.kind}")


# ── Topology ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Topology:
    """
    Data of all m+1 machines, stacked.

    ``X`` has shape (m+1, n, p) with row 0 the master; ``Y`` is (m+1, n) for
    regression and None for raw-vector mean estimation. ``truth`` is θ*.
    """

    X: FloatArray
    Y: FloatArray | None
    byz: ByzantineSet
    truth: FloatArray

    @property
    def m(self) -> int:
        return int(self.X.shape[0]) - 1

    @property
    def n(self) -> int:
        return int(self.X.shape[1])

    @property
    def p(self) -> int:
        return int(self.X.shape[2])

    def shard(self, j: int) -> DataShard:
        if self.Y is None:
            raise DomainError("raw-vector topology has no regression shards")
        return DataShard(self.X[j], self.Y[j])

    @property
    def shards(self) -> list[DataShard]:
        return [self.shard(j) for j in range(self.m + 1)]


@dataclass(frozen=True)
class RcslState:
    theta: FloatArray
    iteration: int = 0
    conv_metric: float = math.inf
    history: tuple[float, ...] = ()
    converged: bool = False


def generate_topology(spec: SyntheticSpec, m: int, n: int, alpha: float,
                      attack: AttackSpec | None, rng: SeededRng) -> Topology:
    """Draw m+1 i.i.d. shards and the Byzantine set from *rng*'s sub-streams."""
    if m < 1 or n < 1:
        raise ConfigError(f"need m >= 1 and n >= 1, got m={m}, n={n}", key="m" if m < 1 else "n")
    if attack is not None and attack.kind == "labelflip" and spec.model != "logistic":
        raise ConfigError("labelflip attack requires the logistic model", key="attack")

    gen = rng.child(DATA_STREAM).generator
    truth = theta_star(spec.p)
    shape = (m + 1, n, spec.p)

    X = gen.standard_normal(shape)  # noqa: N806
    if spec.resolved_covariance != "identity":
        X = X @ cholesky(spec.covariance_matrix()).T  # noqa: N806
    X += truth if spec.model is None else spec.mu_x  # noqa: N806

    Y: FloatArray | None = None  # noqa: N806
    if spec.model is not None:
        u = X @ truth
        if spec.model == "logistic":
            Y = (gen.random(u.shape) < special.expit(u)).astype(np.float64)  # noqa: N806
        elif spec.noise == "student_t":
            Y = u + gen.standard_t(spec.noise_df, size=u.shape)  # noqa: N806
        else:
            Y = u + gen.standard_normal(u.shape)  # noqa: N806

    byz = sample_byzantine_set(m, alpha, rng.child(BYZANTINE_STREAM))
    return Topology(np.asarray(X, dtype=np.float64), Y, byz, truth)


# ── Mean estimation ───────────────────────────────────────────────────────

def run_mean_estimation(top: Topology, spec: AggregatorSpec, attack: AttackSpec,
                        rng: SeededRng) -> FloatArray:
    """Aggregate the (possibly corrupted) block means of raw-vector shards."""
    means = top.X.mean(axis=1)
    if len(top.byz):
        means = corrupt_reports(means, top.byz, attack, rng)
    blocks = BlockSummaries(means, block_sigma_hat(top.X[0]), top.n)
    return aggregate(blocks, spec)


# ── RCSL ──────────────────────────────────────────────────────────────────

def _relative_change(new: FloatArray, old: FloatArray) -> float:
    step = float(np.sum((new - old) ** 2))
    base = float(np.sum(old ** 2))
    return step / base if base > 0.0 else step


def rcsl_step(top: Topology, state: RcslState, model: ModelSpec, agg: AggregatorSpec,
              attack: AttackSpec, rng: SeededRng) -> RcslState:
    """One round: gradients, corruption, aggregation, surrogate solve."""
    t = state.iteration + 1
    Y = top.Y  # noqa: N806
    if Y is None:
        raise DomainError("rcsl needs a regression topology")
    if attack.kind == "labelflip":
        Y = label_flip_responses(Y, top.byz)  # noqa: N806

    reports = stacked_gradients(model, top.X, Y, state.theta)
    if len(top.byz) and attack.kind != "labelflip":
        reports = corrupt_reports(reports, top.byz, attack, rng.child(t))

    master = top.shard(0)
    sigma = block_sigma_hat(per_sample_gradients(model, master, state.theta))
    g_bar = aggregate(BlockSummaries(reports, sigma, top.n), agg)

    try:
        theta = surrogate_minimize(SurrogateProblem(master, model, reports[0] - g_bar),
                                   theta0=state.theta)
    except SolverError as exc:
        raise exc.at_iteration(t) from exc

    history = state.history + (float(np.linalg.norm(theta - top.truth)),)
    return RcslState(theta, t, _relative_change(theta, state.theta), history)


def run_rcsl(top: Topology, model: ModelSpec, agg: AggregatorSpec, attack: AttackSpec,
             stop: StoppingRule, rng: SeededRng) -> RcslState:
    """
    Local ERM on the master, then rounds until the stopping rule fires.

    Under a tolerance rule, hitting ``max_iterations`` with e > tol returns
    the last state with ``converged=False``.
    """
    try:
        theta0 = local_erm(model, top.shard(0))
    except SolverError as exc:
        raise exc.at_iteration(0) from exc
    state = RcslState(theta0, history=(float(np.linalg.norm(theta0 - top.truth)),))

    if stop.kind == "fixed":
        for _ in range(stop.iterations):
            state = rcsl_step(top, state, model, agg, attack, rng)
        return replace(state, converged=True)

    while state.iteration < stop.max_iterations:
        state = rcsl_step(top, state, model, agg, attack, rng)
        if state.conv_metric <= stop.tol:
            return replace(state, converged=True)

    event_bus.emit(RCSL_NONCONVERGED, iterations=state.iteration, e=state.conv_metric)
    metrics.increment("rcsl_nonconverged_total", labels={"aggregator": agg.kind})
    logger.warning("rcsl stopped at max_iterations without reaching tol",
                   extra={"iterations": state.iteration, "conv_metric": state.conv_metric})
    return state


# ── Replications ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ReplicationOutcome:
    index: int
    error: float | None
    iterations: int | None = None
    converged: bool = True
    failure: str | None = None


@dataclass(frozen=True)
class ExperimentResult:
    """Per-replication ℓ₂ errors of one cell and their summaries."""

    config: ReplicationConfig
    errors: tuple[float, ...]
    iterations: tuple[int, ...] = ()
    nonconverged: int = 0
    failures: int = 0

    @property
    def mean_norm(self) -> float:
        return float(np.mean(self.errors))

    @property
    def root_mean_square(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.errors))))

    @property
    def rmse(self) -> float:
        return self.mean_norm if self.config.rmse == "mean-norm" else self.root_mean_square

    @property
    def rmse_std(self) -> float | None:
        """Sample standard deviation of the errors; None with a single replication."""
        if len(self.errors) < 2:
            return None
        return float(np.std(self.errors, ddof=1))

    @property
    def mean_iters(self) -> float | None:
        return float(np.mean(self.iterations)) if self.iterations else None


def _replicate(config: ReplicationConfig, rng: SeededRng, index: int) -> ReplicationOutcome:
    bind_run_context(replication=index)
    labels = {"mode": config.mode}
    started = time.perf_counter()
    try:
        top = generate_topology(config.data, config.m, config.n, config.alpha,
                                config.attack, rng)
        attack_rng = rng.child(ATTACK_STREAM)
        if config.mode == "mean":
            estimate = run_mean_estimation(top, config.aggregator, config.attack, attack_rng)
            outcome = ReplicationOutcome(index, float(np.linalg.norm(estimate - top.truth)))
        else:
            state = run_rcsl(top, config.data.model_spec, config.aggregator, config.attack,
                             config.stop, attack_rng)
            metrics.histogram("rcsl_iterations", state.iteration,
                              labels={"aggregator": config.aggregator.kind})
            outcome = ReplicationOutcome(index, state.history[-1], state.iteration,
                                         state.converged)
    except ByzsimError as exc:
        logger.warning("replication failed: %s", exc)
        metrics.increment("replication_failures_total", labels=labels)
        event_bus.emit(REPLICATION_FAILED, index=index, exc=exc)
        return ReplicationOutcome(index, None, converged=False, failure=str(exc))

    metrics.increment("replications_total",
                      labels={**labels, "aggregator": config.aggregator.kind})
    metrics.timing("replication_duration_ms", (time.perf_counter() - started) * 1000, labels)
    event_bus.emit(REPLICATION_COMPLETED, index=index, error=outcome.error,
                   iterations=outcome.iterations)
    return outcome


def run_replications(config: ReplicationConfig, rng: SeededRng,
                     n_jobs: int | None = None) -> ExperimentResult:
    """
    Run ``config.reps`` independent replications; replication r uses ``rng.child(r)``.

    Work is spread over ``n_jobs`` threads (default ``sim_settings.THREADS``).
    Failed replications are counted and excluded from the error summaries; a
    cell where every replication failed raises SimulationError.
    """
    jobs = n_jobs or sim_settings.THREADS
    logger.debug("running %d replications on %d thread(s)", config.reps, jobs,
                 extra={"cell": config.cell})
    # each task runs in its own copy of the caller's context so run fields propagate
    outcomes: list[ReplicationOutcome] = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(contextvars.copy_context().run)(_replicate, config, rng.child(r), r)
        for r in range(config.reps)
    )

    ok = [o for o in outcomes if o.error is not None]
    failures = len(outcomes) - len(ok)
    if not ok:
        raise SimulationError(
            f"all {config.reps} replications failed in cell {config.cell}: {outcomes[0].failure}",
            failures=failures, reps=config.reps,
        )
    return ExperimentResult(
        config=config,
        errors=tuple(float(o.error) for o in ok if o.error is not None),
        iterations=tuple(int(o.iterations) for o in ok if o.iterations is not None),
        nonconverged=sum(1 for o in ok if not o.converged),
        failures=failures,
    )


def convergence_history(config: ReplicationConfig, rng: SeededRng,
                        replication: int = 0) -> tuple[float, ...]:
    """|θ̂⁽ᵗ⁾ − θ*|₂ for t = 0..T of one rcsl replication, same stream as run_replications."""
    if config.mode != "rcsl":
        raise ConfigError("convergence history is only defined for rcsl mode", key="mode")
    rng = rng.child(replication)
    top = generate_topology(config.data, config.m, config.n, config.alpha, config.attack, rng)
    state = run_rcsl(top, config.data.model_spec, config.aggregator, config.attack,
                     config.stop, rng.child(ATTACK_STREAM))
    return state.history
