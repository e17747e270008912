"""
Settings, event bus, metrics, structured logging and the exit-code contract.
"""

import json
import logging
import sys
from unittest.mock import MagicMock, patch

import pytest

# ── sim_settings ──────────────────────────────────────────────────────────

class TestSimSettings:
    def test_defaults(self):
        from byzsim.conf import sim_settings
        assert sim_settings.LOG_FORMAT == "verbose"
        assert sim_settings.LOG_LEVEL == "INFO"
        assert sim_settings.METRICS_BACKEND is None
        assert sim_settings.THREADS >= 1

    def test_configure_overrides(self):
        from byzsim.conf import sim_settings
        sim_settings.configure(LOG_FORMAT="json", THREADS=1)
        assert sim_settings.LOG_FORMAT == "json"
        assert sim_settings.THREADS == 1

    def test_environment_wins(self, monkeypatch):
        from byzsim.conf import sim_settings
        monkeypatch.setenv("BYZSIM_LOG_LEVEL", "debug")
        sim_settings.configure(LOG_LEVEL="ERROR")
        assert sim_settings.LOG_LEVEL == "DEBUG"

    def test_unknown_key(self):
        from byzsim.conf import sim_settings
        from byzsim.exceptions import ConfigError
        with pytest.raises(ConfigError):
            sim_settings.configure(COLOR="blue")

    @pytest.mark.parametrize("raw", ["zero", "0"])
    def test_invalid_threads(self, monkeypatch, raw):
        from byzsim.conf import sim_settings
        from byzsim.exceptions import ConfigError
        monkeypatch.setenv("BYZSIM_THREADS", raw)
        sim_settings.reload()
        with pytest.raises(ConfigError) as info:
            sim_settings.THREADS
        assert info.value.key == "THREADS"

    def test_invalid_log_format(self):
        from byzsim.conf import sim_settings
        from byzsim.exceptions import ConfigError
        sim_settings.configure(LOG_FORMAT="xml")
        with pytest.raises(ConfigError):
            sim_settings.LOG_FORMAT


# ── Event bus ─────────────────────────────────────────────────────────────

class TestEventBus:
    def test_handlers_receive_kwargs(self):
        from byzsim.events import EventBus
        bus = EventBus()
        handler = MagicMock()
        bus.on("ping")(handler)
        bus.emit("ping", value=3)
        handler.assert_called_once_with(event="ping", value=3)

    def test_wildcard_and_off(self):
        from byzsim.events import EventBus
        bus = EventBus()
        specific, wildcard = MagicMock(), MagicMock()
        bus.on("a")(specific)
        bus.on_any(wildcard)
        bus.emit("a")
        bus.emit("b")
        bus.off("a", specific)
        bus.emit("a")
        assert specific.call_count == 1
        assert wildcard.call_count == 3

    def test_broken_handler_is_swallowed(self):
        from byzsim.events import EventBus
        bus = EventBus()
        after = MagicMock()
        bus.on("x")(MagicMock(side_effect=RuntimeError("boom")))
        bus.on("x")(after)
        bus.emit("x")
        after.assert_called_once()

    def test_events_and_clear(self):
        from byzsim.events import EventBus
        bus = EventBus()
        bus.on("a")(MagicMock())
        bus.on("b")(MagicMock())
        assert sorted(bus.events()) == ["a", "b"]
        bus.clear("a")
        assert bus.events() == ["b"]
        bus.clear()
        assert bus.events() == []


# ── Metrics ───────────────────────────────────────────────────────────────

class TestMetrics:
    def test_noop_without_backend(self):
        from byzsim.metrics import metrics
        metrics.increment("anything")

    def test_backend_receives_calls(self):
        from byzsim.metrics import metrics
        backend = MagicMock()
        metrics.use(backend)
        metrics.increment("hits", labels={"mode": "mean"})
        metrics.histogram("iters", 4.0)
        backend.increment.assert_called_once_with("hits", 1, {"mode": "mean"})
        backend.histogram.assert_called_once_with("iters", 4.0, None)

    def test_backend_failure_ignored(self):
        from byzsim.metrics import metrics
        backend = MagicMock()
        backend.gauge.side_effect = RuntimeError("down")
        metrics.use(backend)
        metrics.gauge("g", 1.0)

    def test_loaded_from_settings(self):
        from byzsim.conf import sim_settings
        from byzsim.metrics import LoggingBackend, metrics
        sim_settings.configure(METRICS_BACKEND="logging")
        metrics.reset()
        assert isinstance(metrics._get_backend(), LoggingBackend)

    def test_bad_dotted_path_disables_metrics(self):
        from byzsim.conf import sim_settings
        from byzsim.metrics import metrics
        sim_settings.configure(METRICS_BACKEND="no.such.Backend")
        metrics.reset()
        assert metrics._get_backend() is None

    def test_track_records_calls_and_duration(self):
        from byzsim.metrics import metrics, track
        backend = MagicMock()
        metrics.use(backend)

        @track("job")
        def job(x):
            return x * 2

        assert job(4) == 8
        backend.increment.assert_called_once_with("job_calls", 1, None)
        assert backend.timing.call_args[0][0] == "job_duration_ms"

    def test_logging_backend_writes_record(self, caplog):
        from byzsim.metrics import LoggingBackend
        with caplog.at_level(logging.DEBUG, logger="byzsim.metrics.log"):
            LoggingBackend(namespace="t").increment("runs", labels={"mode": "rcsl"})
        assert "t_runs=1" in caplog.text

    def test_prometheus_backend_counts_replications(self, tiny_mean_config):
        from byzsim.metrics import PrometheusBackend, metrics
        from byzsim.numerics import SeededRng
        from byzsim.simulator import run_replications
        prom = MagicMock()
        with patch.dict(sys.modules, {"prometheus_client": prom}):
            metrics.use(PrometheusBackend(namespace="byzsim"))
            run_replications(tiny_mean_config, SeededRng(1), n_jobs=1)

        counters = [c.args for c in prom.Counter.call_args_list]
        assert counters == [("byzsim_replications_total", "replications_total",
                             ["mode", "aggregator"])]
        counter = prom.Counter.return_value
        counter.labels.assert_called_with("mean", tiny_mean_config.aggregator.kind)
        assert counter.labels.return_value.inc.call_count == tiny_mean_config.reps
        timings = [c.args[0] for c in prom.Histogram.call_args_list]
        assert timings == ["byzsim_replication_duration_ms"]

    def test_prometheus_registry_sees_run(self, tiny_mean_config):
        prom = pytest.importorskip("prometheus_client")
        from byzsim.metrics import PrometheusBackend, metrics
        from byzsim.numerics import SeededRng
        from byzsim.simulator import run_replications
        metrics.use(PrometheusBackend(namespace="byzsim_registry_check"))
        run_replications(tiny_mean_config, SeededRng(1), n_jobs=2)
        count = prom.REGISTRY.get_sample_value(
            "byzsim_registry_check_replications_total",
            {"mode": "mean", "aggregator": tiny_mean_config.aggregator.kind},
        )
        assert count == tiny_mean_config.reps


# ── Structured logging ────────────────────────────────────────────────────

def _record(msg="cell finished", **extra):
    record = logging.LogRecord("byzsim.cli", logging.INFO, __file__, 1, msg, None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


class TestStructuredLogging:
    def test_json_includes_context_and_extra(self):
        from byzsim.logging_structured import StructuredJsonFormatter, bind_run_context
        bind_run_context(mode="rcsl", cell="p=30,K=10,alpha=0.05,attack=none")
        doc = json.loads(StructuredJsonFormatter().format(_record(rmse=0.027)))
        assert doc["message"] == "cell finished"
        assert doc["mode"] == "rcsl"
        assert doc["rmse"] == 0.027
        assert doc["level"] == "INFO"
        assert doc["timestamp"].endswith("Z")

    def test_verbose_tag(self):
        from byzsim.logging_structured import StructuredVerboseFormatter, bind_run_context
        bind_run_context(mode="mean", cell="p=1", replication=17)
        line = StructuredVerboseFormatter().format(_record())
        assert "[mean p=1 #17] cell finished" in line

    def test_verbose_without_context(self):
        from byzsim.logging_structured import StructuredVerboseFormatter
        assert "[-]" in StructuredVerboseFormatter().format(_record())

    def test_bind_merges_and_skips_none(self):
        from byzsim.logging_structured import (
            bind_run_context,
            clear_run_context,
            get_run_context,
        )
        bind_run_context(mode="mean")
        bind_run_context(cell="c", aggregator=None)
        assert get_run_context() == {"mode": "mean", "cell": "c"}
        clear_run_context()
        assert get_run_context() == {}

    def test_configure_logging_installs_handler(self):
        from byzsim.logging_structured import StructuredJsonFormatter, configure_logging
        configure_logging(level="warning", fmt="json")
        logger = logging.getLogger("byzsim")
        assert logger.level == logging.WARNING
        assert isinstance(logger.handlers[0].formatter, StructuredJsonFormatter)


# ── Exceptions ────────────────────────────────────────────────────────────

class TestExitCodes:
    def test_mapping(self):
        from byzsim.exceptions import (
            ConfigError,
            DomainError,
            OutputError,
            QuadratureError,
            SimulationError,
            SolverError,
            UsageError,
            exit_code_for,
        )
        assert exit_code_for(UsageError("bad flag")) == 1
        assert exit_code_for(ConfigError("bad combo", key="attack")) == 1
        assert exit_code_for(SolverError("stuck")) == 2
        assert exit_code_for(QuadratureError("loose", achieved_tolerance=1e-3)) == 2
        assert exit_code_for(SimulationError("all failed", failures=2, reps=2)) == 2
        assert exit_code_for(DomainError("nan")) == 2
        assert exit_code_for(OutputError("disk full", path="t.csv")) == 2
        assert exit_code_for(KeyError("unexpected")) == 2

    def test_pydantic_validation_is_usage(self):
        from pydantic import ValidationError

        from byzsim.analysis import CovEntryInputs
        from byzsim.exceptions import exit_code_for
        with pytest.raises(ValidationError) as info:
            CovEntryInputs(rho=2.0)
        assert exit_code_for(info.value) == 1

    def test_package_root_exports_model_helpers(self):
        import byzsim
        from byzsim import hessian, loss_value
        assert loss_value is byzsim.models.loss_value
        assert hessian is byzsim.models.hessian
        assert {"loss_value", "hessian", "OutputError"} <= set(byzsim.__all__)

    def test_hierarchy(self):
        from byzsim.exceptions import ByzsimError, DomainError, FactorizationError, UsageError
        assert issubclass(FactorizationError, DomainError)
        assert issubclass(DomainError, ValueError)
        assert issubclass(UsageError, ByzsimError)

    def test_solver_error_tagging(self):
        from byzsim.exceptions import SolverError
        tagged = SolverError("no progress", last_iterate=[1.0], residual_norm=0.3).at_iteration(4)
        assert tagged.iteration == 4
        assert tagged.residual_norm == 0.3
        assert "rcsl iteration 4" in str(tagged)
