"""
byzsim.cli
~~~~~~~~~~
``byzsim`` — Monte Carlo experiments and asymptotic tables.

Commands
--------
    byzsim mean-sim  [flags]              VRMOM vs MOM mean estimation
    byzsim rcsl-sim  [flags]              RCSL vs MOM-RCSL regression
    byzsim analyze   sigma-k|efficiency|c-matrix|hphi  [flags]

Usage::

    byzsim mean-sim --p 1,30 --alpha 0,0.05,0.1,0.15 --attack gaussian --reps 200
    byzsim rcsl-sim --model logistic --mu-x 0.5 --attack labelflip --alpha 0.05,0.1
    byzsim rcsl-sim --stop fixed --iters 5 --format markdown --out table4.md
    byzsim analyze hphi --points 181 --out hphi.csv

Flags override values from ``--config file.json``. Exit codes: 0 success,
1 usage error, 2 runtime failure (including any failed grid cell).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NoReturn

from pydantic import ValidationError

from byzsim.analysis import (
    CovEntryInputs,
    c_limit_entry,
    c_matrix_entry,
    c_mom_entry,
    efficiency_report,
    h_phi,
    phi_grid,
    sigma_K_squared,
)
from byzsim.events import CELL_COMPLETED, CELL_FAILED, event_bus
from byzsim.exceptions import (
    EXIT_OK,
    EXIT_RUNTIME,
    ByzsimError,
    OutputError,
    UsageError,
    exit_code_for,
)
from byzsim.logging_structured import bind_run_context, clear_run_context, configure_logging
from byzsim.metrics import track
from byzsim.numerics import SeededRng
from byzsim.schemas import ExperimentConfig, ResultRow, ResultTable
from byzsim.simulator import ExperimentResult, ReplicationConfig, run_replications

logger = logging.getLogger("byzsim.cli")

ANALYSES = ("sigma-k", "efficiency", "c-matrix", "hphi")
_MODES = {"mean-sim": "mean", "rcsl-sim": "rcsl"}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def _list_of(kind: Callable[[str], Any]) -> Callable[[str], list[Any]]:
    def parse(text: str) -> list[Any]:
        try:
            return [kind(part) for part in text.split(",") if part.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"invalid list {text!r}: {exc}") from exc
    parse.__name__ = f"{kind.__name__}_list"
    return parse


# ── Parser ─────────────────────────────────────────────────────────────────

def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    # defaults stay None so only explicit flags override the config file
    p.add_argument("--config", metavar="PATH", help="JSON file with ExperimentConfig fields")
    p.add_argument("--model", choices=["linear", "logistic", "huber"])
    p.add_argument("--aggregator", help="mean | mom | vrmom | trimmed_mean")
    p.add_argument("--baseline", help="baseline aggregator for ratios, or 'none'")
    p.add_argument("--beta", type=float, help="trim fraction for trimmed_mean")
    p.add_argument("--k", dest="K", type=_list_of(int), help="comma-separated K values")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=_list_of(int), help="comma-separated dimensions")
    p.add_argument("--alpha", type=_list_of(float), help="comma-separated Byzantine fractions")
    p.add_argument("--attack", choices=["none", "gaussian", "omniscient", "bitflip", "labelflip"])
    p.add_argument("--gaussian-std", dest="gaussian_std", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stop", choices=["tol", "fixed"])
    p.add_argument("--tol", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--mu-x", dest="mu_x", type=float)
    p.add_argument("--noise", choices=["normal", "student_t"])
    p.add_argument("--noise-df", dest="noise_df", type=float)
    p.add_argument("--rmse", choices=["mean-norm", "root-mean-square"])
    p.add_argument("--format", choices=["csv", "markdown"])
    p.add_argument("--out", metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="byzsim",
                     description="Byzantine-robust distributed estimation experiments")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _add_sim_flags(subs.add_parser("mean-sim", help="Robust mean estimation tables"))
    _add_sim_flags(subs.add_parser("rcsl-sim", help="RCSL regression tables"))

    a = subs.add_parser("analyze", help="Asymptotic variance and covariance tables")
    a.add_argument("sub", choices=ANALYSES)
    a.add_argument("--k", dest="K", type=_list_of(int), default=[1, 2, 5, 10, 20, 50, 100])
    a.add_argument("--rho", type=_list_of(float), default=[-0.9, -0.5, 0.0, 0.3, 0.5, 0.9])
    a.add_argument("--sigma-sq", dest="sigma_sq", type=float, default=1.0)
    a.add_argument("--points", type=int, default=181)
    a.add_argument("--out", metavar="PATH")
    return parser


# ── Commands ───────────────────────────────────────────────────────────────

_NOT_CONFIG = {"command", "config", "sub"}


def parse_config(args: argparse.Namespace | Sequence[str],
                 config_file: str | Path | None = None) -> ExperimentConfig:
    """
    ExperimentConfig from a JSON file overlaid with explicit flags.

    *args* is either a parsed namespace or a raw argv list starting with the
    sub-command. Invalid values or combinations raise UsageError naming the key.
    """
    ns = args if isinstance(args, argparse.Namespace) else build_parser().parse_args(list(args))
    if ns.command not in _MODES:
        raise UsageError(f"'{ns.command}' does not take an experiment config")

    data: dict[str, Any] = {}
    path = config_file or getattr(ns, "config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {path}: {exc}", key="config") from exc
        if not isinstance(data, dict):
            raise UsageError(f"config file {path} must hold a JSON object", key="config")

    data.update({k: v for k, v in vars(ns).items() if v is not None and k not in _NOT_CONFIG})
    data["mode"] = _MODES[ns.command]
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = ".".join(str(part) for part in err["loc"]) or None
        raise UsageError(f"invalid configuration: {err['msg']}", key=key) from exc


def _row(cell: ReplicationConfig, config: ExperimentConfig, result: ExperimentResult | None,
         baseline: ExperimentResult | None) -> ResultRow:
    ratio = None
    if result is not None and baseline is not None and baseline.rmse > 0:
        ratio = result.rmse / baseline.rmse
    return ResultRow(
        mode=cell.mode, model=cell.data.model, aggregator=cell.aggregator.kind,
        K=cell.aggregator.K, m=cell.m, n=cell.n, p=cell.data.p, alpha=cell.alpha,
        attack=cell.attack.kind, reps=cell.reps, seed=config.seed,
        rmse=None if result is None else result.rmse,
        rmse_std=None if result is None else result.rmse_std,
        baseline_rmse=None if baseline is None else baseline.rmse,
        ratio=ratio,
        mean_iters=None if result is None else result.mean_iters,
        nonconverged=0 if result is None else result.nonconverged,
    )


@track("table")
def run_table(config: ExperimentConfig, n_jobs: int | None = None) -> ResultTable:
    """
    Every grid cell with the configured aggregator and, when set, the baseline.

    Both runs of a cell share one seed so their ratio is paired. A failing
    cell is logged, announced on the event bus and kept as a row without
    estimates.
    """
    rng = SeededRng(config.seed)
    cells = config.cells()
    baselines = config.baseline_cells() or [None] * len(cells)
    table = ResultTable()
    for cell, base in zip(cells, baselines):
        bind_run_context(mode=cell.mode, cell=cell.cell, aggregator=cell.aggregator.kind)
        try:
            result = run_replications(cell, rng, n_jobs=n_jobs)
            reference = None if base is None else run_replications(base, rng, n_jobs=n_jobs)
        except ByzsimError as exc:
            logger.error("cell failed: %s", exc)
            event_bus.emit(CELL_FAILED, cell=cell, exc=exc)
            table.rows.append(_row(cell, config, None, None))
            continue
        finally:
            clear_run_context()
        row = _row(cell, config, result, reference)
        table.rows.append(row)
        event_bus.emit(CELL_COMPLETED, row=row)
    return table


def parse_table(text: str) -> ResultTable:
    return ResultTable.from_csv(text)


def emit(table: ResultTable, fmt: str = "csv", out: str | Path | None = None) -> str:
    """Render *table*; write it to *out* when given, otherwise return the text only."""
    if fmt not in ("csv", "markdown"):
        raise UsageError(f"unknown format '{fmt}'", key="format")
    text = table.to_csv() if fmt == "csv" else table.to_markdown()
    if out is not None:
        _write(Path(out), text)
    return text


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}", path=str(path)) from exc
    logger.info("wrote %s", path)


def _csv(header: Sequence[str], rows: list[Sequence[float]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in r)
              for r in rows]
    return "\n".join(lines) + "\n"


def analyze_cmd(sub: str, K: Sequence[int] = (1, 5, 10),  # noqa: N803
                rho: Sequence[float] = (0.0, 0.5), sigma_sq: float = 1.0,
                points: int = 181, out: str | Path | None = None) -> str:
    """CSV for one of the asymptotic analyses; written to *out* when given."""
    if sub == "sigma-k":
        text = _csv(("K", "sigma_K_sq"), [(k, sigma_K_squared(k, sigma_sq)) for k in K])
    elif sub == "efficiency":
        reports = [efficiency_report(k) for k in K]
        text = _csv(("K", "efficiency", "mom_efficiency", "limit_efficiency"),
                    [(r.K, r.efficiency, r.mom_efficiency, r.limit_efficiency) for r in reports])
    elif sub == "c-matrix":
        bad = [r for r in rho if not -1.0 <= r <= 1.0]
        if bad:
            raise UsageError(f"rho must lie in [-1, 1], got {bad}", key="rho")
        rows: list[Sequence[float]] = []
        for r in rho:
            limit = c_limit_entry(r)
            mom = c_mom_entry(r)
            rows += [(r, k, c_matrix_entry(CovEntryInputs(rho=r, K=k)), mom, limit) for k in K]
        text = _csv(("rho", "K", "c_entry", "c_mom_entry", "c_limit_entry"), rows)
    elif sub == "hphi":
        grid = phi_grid(points)
        text = _csv(("phi", "h"), [(float(phi), h_phi(float(phi))) for phi in grid])
    else:
        raise UsageError(f"unknown analysis '{sub}', expected one of {ANALYSES}", key="sub")
    if out is not None:
        _write(Path(out), text)
    return text


def _progress(row: ResultRow, **_: Any) -> None:
    logger.info("cell done: %s alpha=%g rmse=%s ratio=%s", row.aggregator, row.alpha,
                "n/a" if row.rmse is None else f"{row.rmse:.4f}",
                "n/a" if row.ratio is None else f"{row.ratio:.4f}")


# ── Entrypoint ─────────────────────────────────────────────────────────────

def main(argv: Sequence[str] | None = None) -> int:
    try:
        configure_logging()
        args = build_parser().parse_args(argv)
        if args.command == "analyze":
            text = analyze_cmd(args.sub, K=args.K, rho=args.rho, sigma_sq=args.sigma_sq,
                               points=args.points, out=args.out)
            if args.out is None:
                sys.stdout.write(text)
            return EXIT_OK

        config = parse_config(args)
        event_bus.on(CELL_COMPLETED)(_progress)
        try:
            table = run_table(config)
        finally:
            event_bus.off(CELL_COMPLETED, _progress)
        text = emit(table, config.format, config.out)
        if config.out is None:
            sys.stdout.write(text)
        failed = sum(1 for row in table.rows if row.failed)
        if failed:
            logger.error("%d of %d cells failed", failed, len(table))
            return EXIT_RUNTIME
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001
        return exit_code_for(exc)


if __name__ == "__main__":
    raise SystemExit(main())
