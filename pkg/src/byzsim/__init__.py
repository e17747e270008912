"""
byzsim — Byzantine-robust distributed estimation, simulated.

Variance-reduced median-of-means (VRMOM) aggregation, the robust
communication-efficient surrogate likelihood (RCSL) driver, Byzantine
attack models and a reproducible Monte Carlo harness.

    pip install byzsim

Basic usage::

    from byzsim import ExperimentConfig, run_table, emit

    config = ExperimentConfig(mode="mean", alpha=[0.0, 0.15], attack="gaussian", reps=200)
    print(emit(run_table(config), "markdown"))

Single aggregation::

    from byzsim import AggregatorSpec, BlockSummaries, aggregate

    blocks = BlockSummaries(block_means, sigma_hat=master_sd, n=1000)
    aggregate(blocks, AggregatorSpec(kind="vrmom", K=10))
"""

__version__ = "0.1.0"

# ruff: noqa: I001  (grouped by feature)

# ── Numerics ──────────────────────────────────────────────────────────────
from byzsim.numerics import (
    SeededRng, normal_cdf, normal_inv_cdf, normal_pdf,
    select_quantile, cholesky, solve_spd,
)

# ── Aggregators ───────────────────────────────────────────────────────────
from byzsim.aggregators import (
    AggregatorSpec, BlockSummaries, aggregate,
    mean_aggregate, mom_aggregate, vrmom_aggregate, trimmed_mean_aggregate,
    vrmom_correction_summand, block_sigma_hat,
)
from byzsim.registry import AggregatorRegistry, aggregator_registry

# ── Models ────────────────────────────────────────────────────────────────
from byzsim.models import (
    ModelSpec, DataShard, SurrogateProblem,
    gradient, per_sample_gradients, loss_value, hessian, surrogate_minimize, local_erm,
)

# ── Attacks ───────────────────────────────────────────────────────────────
from byzsim.attacks import (
    AttackSpec, ByzantineSet, sample_byzantine_set, corrupt_report, label_flip_shard,
)

# ── Simulator ─────────────────────────────────────────────────────────────
from byzsim.simulator import (
    SyntheticSpec, StoppingRule, ReplicationConfig, Topology, RcslState, ExperimentResult,
    theta_star, generate_topology, run_mean_estimation, rcsl_step, run_rcsl,
    run_replications, convergence_history,
)

# ── Analysis ──────────────────────────────────────────────────────────────
from byzsim.analysis import (
    EfficiencyReport, CovEntryInputs,
    sigma_K_squared, efficiency_report, bivariate_normal_cdf,
    c_matrix_entry, c_mom_entry, c_limit_entry, h_phi, gap_matrix,
)

# ── Tables & CLI ──────────────────────────────────────────────────────────
from byzsim.schemas import ExperimentConfig, ResultRow, ResultTable
from byzsim.cli import parse_config, run_table, emit, parse_table, analyze_cmd

# ── Events ────────────────────────────────────────────────────────────────
from byzsim.events import (
    EventBus, event_bus,
    REPLICATION_COMPLETED, REPLICATION_FAILED, RCSL_NONCONVERGED,
    CELL_COMPLETED, CELL_FAILED, AGGREGATOR_REGISTERED,
)

# ── Metrics ───────────────────────────────────────────────────────────────
from byzsim.metrics import (
    Metrics, metrics, track, BaseMetricsBackend, LoggingBackend, PrometheusBackend,
)

# ── Structured logging ────────────────────────────────────────────────────
from byzsim.logging_structured import (
    StructuredJsonFormatter, StructuredVerboseFormatter, configure_logging,
    bind_run_context, get_run_context, clear_run_context,
)

# ── Settings & errors ─────────────────────────────────────────────────────
from byzsim.conf import sim_settings
from byzsim.exceptions import (
    ByzsimError, DomainError, FactorizationError, ConfigError, UsageError,
    SolverError, QuadratureError, SimulationError, OutputError,
)

__all__ = [
    # Numerics
    "SeededRng", "normal_cdf", "normal_inv_cdf", "normal_pdf",
    "select_quantile", "cholesky", "solve_spd",

    # Aggregators
    "AggregatorSpec", "BlockSummaries", "aggregate",
    "mean_aggregate", "mom_aggregate", "vrmom_aggregate", "trimmed_mean_aggregate",
    "vrmom_correction_summand", "block_sigma_hat",
    "AggregatorRegistry", "aggregator_registry",

    # Models
    "ModelSpec", "DataShard", "SurrogateProblem",
    "gradient", "per_sample_gradients", "loss_value", "hessian", "surrogate_minimize", "local_erm",

    # Attacks
    "AttackSpec", "ByzantineSet", "sample_byzantine_set", "corrupt_report", "label_flip_shard",

    # Simulator
    "SyntheticSpec", "StoppingRule", "ReplicationConfig", "Topology", "RcslState",
    "ExperimentResult", "theta_star", "generate_topology", "run_mean_estimation",
    "rcsl_step", "run_rcsl", "run_replications", "convergence_history",

    # Analysis
    "EfficiencyReport", "CovEntryInputs",
    "sigma_K_squared", "efficiency_report", "bivariate_normal_cdf",
    "c_matrix_entry", "c_mom_entry", "c_limit_entry", "h_phi", "gap_matrix",

    # Tables & CLI
    "ExperimentConfig", "ResultRow", "ResultTable",
    "parse_config", "run_table", "emit", "parse_table", "analyze_cmd",

    # Events
    "EventBus", "event_bus",
    "REPLICATION_COMPLETED", "REPLICATION_FAILED", "RCSL_NONCONVERGED",
    "CELL_COMPLETED", "CELL_FAILED", "AGGREGATOR_REGISTERED",

    # Metrics
    "Metrics", "metrics", "track", "BaseMetricsBackend", "LoggingBackend", "PrometheusBackend",

    # Structured logging
    "StructuredJsonFormatter", "StructuredVerboseFormatter", "configure_logging",
    "bind_run_context", "get_run_context", "clear_run_context",

    # Settings & errors
    "sim_settings",
    "ByzsimError", "DomainError", "FactorizationError", "ConfigError", "UsageError",
    "SolverError", "QuadratureError", "SimulationError", "OutputError",
]
