"""
byzsim.exceptions
~~~~~~~~~~~~~~~~~
Exception hierarchy and the single place that maps failures to exit codes.

Every error raised by the library derives from ``ByzsimError`` so callers can
catch the whole family at once::

    from byzsim.exceptions import ByzsimError, exit_code_for

    try:
        table = run_table(config)
    except ByzsimError as exc:
        sys.exit(exit_code_for(exc))

Exit code contract (CLI)::

    0   success
    1   usage / configuration error, including pydantic validation
    2   runtime failure (solver, quadrature, simulation, output)
"""

from __future__ import annotations

import logging
from typing import Any

from pydantic import ValidationError

logger = logging.getLogger("byzsim.exceptions")

EXIT_OK      = 0
EXIT_USAGE   = 1
EXIT_RUNTIME = 2


class ByzsimError(Exception):
    """Base class for every error raised by byzsim."""


class DomainError(ByzsimError, ValueError):
    """An input lies outside the domain of a numerical routine."""


class FactorizationError(DomainError):
    """Cholesky factorization failed; ``pivot`` is the 0-based failing index."""

    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


class ConfigError(ByzsimError, ValueError):
    """An invalid spec or configuration combination."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class UsageError(ConfigError):
    """Command-line usage error (unknown flag, malformed value, bad combination)."""


class SolverError(ByzsimError, ArithmeticError):
    """
    An iterative solver did not reach its tolerance.

    Carries the last iterate and the final gradient ∞-norm. ``iteration`` is
    filled in by the RCSL driver when the failure happens inside a round.
    """

    def __init__(
        self,
        message: str,
        last_iterate: Any = None,
        residual_norm: float | None = None,
        iteration: int | None = None,
    ):
        super().__init__(message)
        self.last_iterate  = last_iterate
        self.residual_norm = residual_norm
        self.iteration     = iteration

    def at_iteration(self, iteration: int) -> SolverError:
        """Return a copy tagged with the RCSL iteration it failed in."""
        return SolverError(
            f"{self.args[0]} (rcsl iteration {iteration})",
            last_iterate=self.last_iterate,
            residual_norm=self.residual_norm,
            iteration=iteration,
        )


class QuadratureError(ByzsimError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved_tolerance: float):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class SimulationError(ByzsimError, RuntimeError):
    """Every replication of a cell failed; carries the failure count."""

    def __init__(self, message: str, failures: int, reps: int):
        super().__init__(message)
        self.failures = failures
        self.reps     = reps


class OutputError(ByzsimError, OSError):
    """A result file could not be written; ``path`` is the destination."""

    def __init__(self, message: str, path: str):
        super().__init__(message)
        self.path = path


def exit_code_for(exc: BaseException) -> int:
    """Map *exc* to a CLI exit code and log it at the matching level."""
    if isinstance(exc, ConfigError):
        key = f" [key={exc.key}]" if exc.key else ""
        logger.error("Usage error%s: %s", key, exc)
        return EXIT_USAGE
    if isinstance(exc, ValidationError):
        logger.error("Usage error: %s", exc)
        return EXIT_USAGE
    if isinstance(exc, ByzsimError):
        logger.error("Runtime failure: %s", exc)
        return EXIT_RUNTIME
    logger.exception("Unhandled exception", exc_info=exc)
    return EXIT_RUNTIME
