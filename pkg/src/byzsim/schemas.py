"""
byzsim.schemas
~~~~~~~~~~~~~~
Experiment grid configuration and result tables.

``ExperimentConfig`` is what a JSON config file or the CLI flags describe:
one mode, one model, list-valued grid axes (p, K, alpha). ``cells()``
expands it into one ``ReplicationConfig`` per grid point, and
``baseline_cells()`` into the same points with the baseline aggregator.

``ResultTable`` serialises to CSV with the fixed column order below and to a
markdown layout with one block per (model, attack, p, K) and one column per
alpha. Missing values are written ``n/a``.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterator
from typing import Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)

from byzsim.aggregators import AggregatorSpec
from byzsim.attacks import AttackKind, AttackSpec
from byzsim.exceptions import DomainError
from byzsim.models import ModelKind
from byzsim.simulator import Mode, ReplicationConfig, RmseKind, StoppingRule, SyntheticSpec

CSV_COLUMNS = (
    "mode", "model", "aggregator", "K", "m", "n", "p", "alpha", "attack", "reps", "seed",
    "rmse", "rmse_std", "baseline_rmse", "ratio", "mean_iters", "nonconverged",
)
MISSING = "n/a"
CLI_AGGREGATORS = ("mean", "mom", "vrmom", "trimmed_mean")


def _aggregator_kind(value: str) -> str:
    kind = AggregatorSpec(kind=value).kind
    if kind not in CLI_AGGREGATORS:
        raise ValueError(f"unknown aggregator '{value}', expected one of {CLI_AGGREGATORS}")
    return kind


class ExperimentConfig(BaseModel):
    """A table's worth of grid cells. Defaults reproduce the m = 100, n = 1000 setup."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Mode = "mean"
    model: ModelKind | None = None
    aggregator: str = "vrmom"
    baseline: str | None = "mom"
    beta: float = Field(0.1, ge=0.0, lt=0.5)
    m: int = Field(100, ge=1)
    n: int = Field(1000, ge=1)
    p: list[int] = Field(default_factory=lambda: [30], min_length=1)
    K: list[int] = Field(default_factory=lambda: [10], min_length=1)
    alpha: list[float] = Field(default_factory=lambda: [0.0], min_length=1)
    attack: AttackKind = "none"
    gaussian_std: float = Field(math.sqrt(200.0), gt=0.0)
    reps: int = Field(500, ge=1)
    stop: Literal["tol", "fixed"] = "tol"
    tol: float = Field(1e-4, gt=0.0)
    iters: int = Field(10, ge=0)
    max_iters: int = Field(50, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    mu_x: float = 0.0
    noise: Literal["normal", "student_t"] = "normal"
    noise_df: float = Field(3.0, gt=0.0)
    rmse: RmseKind = "mean-norm"
    format: Literal["csv", "markdown"] = "csv"
    out: str | None = None

    @field_validator("aggregator")
    @classmethod
    def _check_aggregator(cls, v: str) -> str:
        return _aggregator_kind(v)

    @field_validator("baseline")
    @classmethod
    def _check_baseline(cls, v: str | None) -> str | None:
        if v is None or v.strip().lower() == "none":
            return None
        return _aggregator_kind(v)

    @field_validator("p", "K")
    @classmethod
    def _positive(cls, v: list[int]) -> list[int]:
        if any(x < 1 for x in v):
            raise ValueError(f"grid values must be >= 1, got {v}")
        return v

    @field_validator("alpha")
    @classmethod
    def _fractions(cls, v: list[float]) -> list[float]:
        if any(not 0.0 <= a < 0.5 for a in v):
            raise ValueError(f"alpha values must lie in [0, 1/2), got {v}")
        return v

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for axis in ("p", "K", "alpha"):
            if isinstance(data.get(axis), (int, float)):
                data[axis] = [data[axis]]
        if data.get("mode") == "rcsl" and data.get("model") is None:
            data["model"] = "linear"
        return data

    @field_validator("model")
    @classmethod
    def _model_fits_mode(cls, v: ModelKind | None, info: ValidationInfo) -> ModelKind | None:
        if info.data.get("mode") == "mean" and v is not None:
            raise ValueError("mean mode takes no --model")
        return v

    @field_validator("attack")
    @classmethod
    def _attack_fits_model(cls, v: AttackKind, info: ValidationInfo) -> AttackKind:
        if v == "labelflip" and info.data.get("model") != "logistic":
            raise ValueError("labelflip attack requires --model logistic")
        return v

    # ── Grid expansion ────────────────────────────────────────────────────

    def _cell(self, aggregator: str, p: int, K: int, alpha: float) -> ReplicationConfig:  # noqa: N803
        return ReplicationConfig(
            mode=self.mode,
            data=SyntheticSpec(model=self.model, p=p, mu_x=self.mu_x,
                               noise=self.noise, noise_df=self.noise_df),
            aggregator=AggregatorSpec(kind=aggregator, K=K, beta=self.beta),
            attack=AttackSpec(kind=self.attack, gaussian_std=self.gaussian_std),
            m=self.m, n=self.n, alpha=alpha, reps=self.reps,
            stop=StoppingRule(kind="fixed" if self.stop == "fixed" else "tolerance",
                              iterations=self.iters, tol=self.tol,
                              max_iterations=self.max_iters),
            rmse=self.rmse,
        )

    def grid(self) -> Iterator[tuple[int, int, float]]:
        for p in self.p:
            for K in self.K:  # noqa: N806
                for alpha in self.alpha:
                    yield p, K, alpha

    def cells(self) -> list[ReplicationConfig]:
        return [self._cell(self.aggregator, p, K, a) for p, K, a in self.grid()]

    def baseline_cells(self) -> list[ReplicationConfig] | None:
        if self.baseline is None:
            return None
        return [self._cell(self.baseline, p, K, a) for p, K, a in self.grid()]


# ── Results ───────────────────────────────────────────────────────────────

class ResultRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: str
    model: str | None
    aggregator: str
    K: int
    m: int
    n: int
    p: int
    alpha: float
    attack: str
    reps: int
    seed: int
    rmse: float | None = None
    rmse_std: float | None = None
    baseline_rmse: float | None = None
    ratio: float | None = None
    mean_iters: float | None = None
    nonconverged: int = 0

    @property
    def failed(self) -> bool:
        return self.rmse is None


def _cell_text(value: Any) -> str:
    if value is None:
        return MISSING
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ResultTable(BaseModel):
    rows: list[ResultRow] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            data = row.model_dump()
            writer.writerow([_cell_text(data[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> ResultTable:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise DomainError(f"unexpected CSV header: {reader.fieldnames}")
        rows = [
            ResultRow.model_validate({k: (None if v == MISSING else v) for k, v in rec.items()})
            for rec in reader
        ]
        return cls(rows=rows)

    def to_markdown(self) -> str:
        """One block per (model, attack, p, K); rows aggregator / baseline / ratio."""
        blocks: dict[tuple[Any, ...], list[ResultRow]] = {}
        for row in self.rows:
            blocks.setdefault((row.mode, row.model, row.attack, row.p, row.K), []).append(row)

        out: list[str] = []
        for (mode, model, attack, p, K), rows in blocks.items():  # noqa: N806
            title = f"### {mode}" + (f" {model}" if model else "")
            out.append(f"{title} | attack={attack} | p={p} | K={K}")
            out.append("")
            out.append("| | " + " | ".join(f"alpha={r.alpha:g}" for r in rows) + " |")
            out.append("|---" * (len(rows) + 1) + "|")
            out.append(f"| {rows[0].aggregator} | "
                       + " | ".join(_estimate(r.rmse, r.rmse_std) for r in rows) + " |")
            if any(r.baseline_rmse is not None for r in rows):
                out.append("| baseline | "
                           + " | ".join(_estimate(r.baseline_rmse, None) for r in rows) + " |")
                out.append("| Ratio | "
                           + " | ".join(_fixed(r.ratio) for r in rows) + " |")
            if any(r.mean_iters is not None for r in rows):
                out.append("| iterations | "
                           + " | ".join(_fixed(r.mean_iters, 2) for r in rows) + " |")
            out.append("")
        return "\n".join(out)


def _fixed(value: float | None, digits: int = 4) -> str:
    return MISSING if value is None else f"{value:.{digits}f}"


def _estimate(rmse: float | None, std: float | None) -> str:
    if rmse is None:
        return "failed"
    return f"{rmse:.4f}" + (f" ({std:.4f})" if std is not None else "")
