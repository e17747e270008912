import logging

import pytest


@pytest.fixture(autouse=True)
def _isolated_state():
    """Fresh settings, metrics backend, event handlers and log context per test."""
    from byzsim.conf import sim_settings
    from byzsim.events import event_bus
    from byzsim.logging_structured import clear_run_context
    from byzsim.metrics import metrics

    sim_settings.reload()
    metrics.reset()
    clear_run_context()
    yield
    # undo configure_logging() run by cli.main
    root = logging.getLogger("byzsim")
    root.handlers.clear()
    root.propagate = True
    root.setLevel(logging.NOTSET)
    event_bus.clear()
    metrics.reset()
    sim_settings.reload()
    clear_run_context()


@pytest.fixture
def rng():
    from byzsim.numerics import SeededRng
    return SeededRng(20240601)


@pytest.fixture
def tiny_mean_config():
    """A mean-estimation cell small enough for unit tests."""
    from byzsim.attacks import AttackSpec
    from byzsim.simulator import ReplicationConfig, SyntheticSpec

    return ReplicationConfig(
        mode="mean", data=SyntheticSpec(p=3), attack=AttackSpec(kind="gaussian"),
        m=10, n=40, alpha=0.2, reps=6,
    )


@pytest.fixture
def tiny_rcsl_config():
    from byzsim.simulator import ReplicationConfig, StoppingRule, SyntheticSpec

    return ReplicationConfig(
        mode="rcsl", data=SyntheticSpec(model="linear", p=4), m=10, n=200, reps=4,
        stop=StoppingRule(kind="tolerance", tol=1e-6, max_iterations=30),
    )
