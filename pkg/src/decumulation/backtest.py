"""Historical cohort simulation of retirements funded by (levered) portfolios.

Each cohort withdraws c * (1+s)^i at the start of month i, then the remaining
assets earn that month's monthly-rebalanced portfolio return. A cohort that
starts in month m invests at month m's price, so its first return is the one
dated m+1. Accounting is
signed: a cohort keeps running after its equity falls to zero, so temporary
breaches and negative terminal values are visible.
"""

from __future__ import annotations

import csv
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ModelError, WindowError
from .series import MonthIndex, MonthlyReturnSeries, blend

FIXED_DEBT = "fixed-debt"
CONSTANT_LEVERAGE = "constant-leverage"
DEBT_MODES = (FIXED_DEBT, CONSTANT_LEVERAGE)


@dataclass(frozen=True, eq=False)
class PortfolioSpec:
    """Asset weights plus leverage.

    ``cost`` is the monthly borrowing-rate series charged on debt; it is
    required whenever ``leverage != 1``.
    """

    weights: Mapping[str, float]
    leverage: float = 1.0
    cost: Optional[MonthlyReturnSeries] = None
    debt_mode: str = FIXED_DEBT

    def __post_init__(self):
        w = dict(self.weights)
        if not w or any(v < 0 for v in w.values()):
            raise ModelError(f"weights must be non-negative: {w}")
        if abs(sum(w.values()) - 1.0) > 1e-12:
            raise ModelError(f"weights must sum to 1, got {sum(w.values())!r}")
        if self.leverage < 0:
            raise ModelError(f"leverage must be >= 0, got {self.leverage}")
        if self.leverage != 1 and self.cost is None:
            raise ModelError("a levered portfolio needs a borrowing-cost series")
        if self.debt_mode not in DEBT_MODES:
            raise ModelError(f"debt_mode must be one of {DEBT_MODES}")
        object.__setattr__(self, "weights", w)

    def portfolio_returns(self, assets: Mapping[str, MonthlyReturnSeries]) -> MonthlyReturnSeries:
        try:
            series = [assets[name] for name in self.weights]
        except KeyError as exc:
            raise ModelError(f"no return series for asset {exc}") from None
        return blend(series, list(self.weights.values()))


@dataclass(frozen=True)
class RetirementPlan:
    initial_withdrawal: float
    s: float = 0.003
    t: int = 360
    start: Optional[MonthIndex] = None

    def __post_init__(self):
        if not 0 < self.initial_withdrawal < 1:
            raise ModelError(f"initial withdrawal must be in (0, 1), got {self.initial_withdrawal}")
        if self.t < 1:
            raise ModelError(f"horizon must be >= 1 month, got {self.t}")
        if not self.s > -1:
            raise ModelError(f"consumption growth must exceed -1, got {self.s}")

    def at(self, start: MonthIndex) -> "RetirementPlan":
        return RetirementPlan(self.initial_withdrawal, self.s, self.t, start)


@dataclass(frozen=True, eq=False)
class RetirementTrajectory:
    start: MonthIndex
    equity_path: np.ndarray
    breach_months: tuple = ()

    @property
    def first_breach(self) -> Optional[int]:
        return self.breach_months[0] if self.breach_months else None

    @property
    def failed(self) -> bool:
        return bool(self.breach_months)

    @property
    def terminal(self) -> float:
        return float(self.equity_path[-1])

    @classmethod
    def from_path(cls, start: MonthIndex, path) -> "RetirementTrajectory":
        path = np.asarray(path, dtype=float)
        breaches = tuple(int(i) for i in np.flatnonzero(path[1:] <= 0.0) + 1)
        return cls(start, path, breaches)


def _window(series: MonthlyReturnSeries, start: MonthIndex, t: int) -> np.ndarray:
    # returns are dated at the end of the month they are earned over, so a
    # cohort starting in month m uses the values dated m+1 .. m+t
    first, last = start + 1, start + t
    if first < series.start or last > series.end:
        raise WindowError(
            f"{series.label} covers {series.start}..{series.end}, "
            f"cohort starting {start} needs {first}..{last}"
        )
    i0 = first - series.start
    return series.values[i0 : i0 + t]


def equity_recurrence(r, q, leverage, c, s, t, debt_mode=FIXED_DEBT) -> np.ndarray:
    """Month-end equity over W for one cohort; element 0 is the initial 1."""
    path = np.empty(t + 1)
    path[0] = 1.0
    withdrawals = c * (1.0 + s) ** np.arange(t)
    if debt_mode == FIXED_DEBT:
        assets, debt = float(leverage), float(leverage) - 1.0
        for i in range(t):
            assets = (assets - withdrawals[i]) * (1.0 + r[i])
            if debt != 0.0:
                debt = debt * (1.0 + q[i])
            path[i + 1] = assets - debt
    else:
        equity = 1.0
        b = leverage - 1.0
        for i in range(t):
            levered = leverage * r[i] - (b * q[i] if b != 0.0 else 0.0)
            equity = (equity - withdrawals[i]) * (1.0 + levered)
            path[i + 1] = equity
    return path


def _prepare(spec: PortfolioSpec, assets: Mapping[str, MonthlyReturnSeries]):
    port = spec.portfolio_returns(assets)
    cost = spec.cost if spec.leverage != 1 else None
    return port, cost


def _simulate(port, cost, spec: PortfolioSpec, plan: RetirementPlan, start) -> RetirementTrajectory:
    r = _window(port, start, plan.t)
    q = _window(cost, start, plan.t) if cost is not None else None
    path = equity_recurrence(
        r, q, spec.leverage, plan.initial_withdrawal, plan.s, plan.t, spec.debt_mode
    )
    return RetirementTrajectory.from_path(start, path)


def simulate_retirement(
    spec: PortfolioSpec,
    plan: RetirementPlan,
    assets: Mapping[str, MonthlyReturnSeries],
) -> RetirementTrajectory:
    """Run one cohort starting at ``plan.start``."""
    if plan.start is None:
        raise ModelError("plan has no start month")
    port, cost = _prepare(spec, assets)
    return _simulate(port, cost, spec, plan, plan.start)


def cohort_grid(first: MonthIndex, last: MonthIndex, step: int = 12) -> list[MonthIndex]:
    """Start months from ``first`` to ``last`` inclusive, every ``step`` months."""
    if last < first:
        raise ModelError(f"empty cohort grid {first}..{last}")
    return [first + k for k in range(0, (last - first) + 1, step)]


@dataclass(frozen=True, eq=False)
class BacktestReport:
    trajectories: tuple
    label: str = ""
    initial_withdrawal: Optional[float] = None
    leverage: float = 1.0

    def __post_init__(self):
        trajs = tuple(sorted(self.trajectories, key=lambda tr: tr.start))
        if not trajs:
            raise ModelError("a report needs at least one cohort")
        object.__setattr__(self, "trajectories", trajs)

    @property
    def cohort_count(self) -> int:
        return len(self.trajectories)

    @property
    def failure_rate(self) -> float:
        return sum(tr.failed for tr in self.trajectories) / self.cohort_count

    @property
    def terminals(self) -> list[float]:
        return [tr.terminal for tr in self.trajectories]

    @property
    def mean_terminal(self) -> float:
        return float(np.mean(self.terminals))

    @property
    def median_terminal(self) -> float:
        return float(statistics.median(self.terminals))

    @property
    def first_breaches(self) -> list[int]:
        return [tr.first_breach for tr in self.trajectories if tr.failed]

    def breach_timing(self) -> dict:
        fb = self.first_breaches
        if not fb:
            return {"min": None, "max": None, "p10": None, "p50": None, "p90": None}
        p10, p50, p90 = (float(x) for x in np.quantile(fb, [0.1, 0.5, 0.9]))
        return {"min": min(fb), "max": max(fb), "p10": p10, "p50": p50, "p90": p90}

    def to_dict(self, include_cohorts: bool = True) -> dict:
        d = {
            "label": self.label,
            "initial_withdrawal": self.initial_withdrawal,
            "leverage": self.leverage,
            "cohort_count": self.cohort_count,
            "failure_rate": self.failure_rate,
            "mean_terminal": self.mean_terminal,
            "median_terminal": self.median_terminal,
            "first_breach": self.breach_timing(),
        }
        if include_cohorts:
            d["cohorts"] = [
                {
                    "start": str(tr.start),
                    "terminal": tr.terminal,
                    "first_breach": tr.first_breach,
                    "breach_month_count": len(tr.breach_months),
                }
                for tr in self.trajectories
            ]
        return d


def run_cohorts(
    spec: PortfolioSpec,
    plan_template: RetirementPlan,
    start_grid: Sequence[MonthIndex],
    assets: Mapping[str, MonthlyReturnSeries],
    workers: int = 1,
    label: str = "",
) -> BacktestReport:
    """Simulate every cohort in ``start_grid``; order of execution is irrelevant."""
    port, cost = _prepare(spec, assets)
    for start in start_grid:
        _window(port, start, plan_template.t)
        if cost is not None:
            _window(cost, start, plan_template.t)

    def one(start):
        return _simulate(port, cost, spec, plan_template, start)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajectories = list(pool.map(one, start_grid))
    else:
        trajectories = [one(s) for s in start_grid]
    return BacktestReport(
        tuple(trajectories), label, plan_template.initial_withdrawal, spec.leverage
    )


def summarize(report: BacktestReport, fmt: str = "text") -> str:
    """Failure rate, terminal statistics and breach timing as text or JSON."""
    if fmt == "json":
        return json.dumps(report.to_dict(include_cohorts=False), indent=2, sort_keys=True)
    bt = report.breach_timing()
    lines = [
        f"{report.label or 'backtest'}: {report.cohort_count} cohorts",
        f"  failure rate     {report.failure_rate:7.1%}",
        f"  mean terminal    {report.mean_terminal:+8.3f} W",
        f"  median terminal  {report.median_terminal:+8.3f} W",
    ]
    if bt["min"] is not None:
        lines.append(
            f"  first breach     months {bt['min']}..{bt['max']} "
            f"(p10 {bt['p10']:.0f}, median {bt['p50']:.0f}, p90 {bt['p90']:.0f})"
        )
    return "\n".join(lines)


TRAJECTORY_COLUMNS = ("cohort_start", "month_index", "equity_over_w", "breached")


def write_trajectories_csv(report: BacktestReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for tr in report.trajectories:
            for i, e in enumerate(tr.equity_path):
                w.writerow([str(tr.start), i, repr(float(e)), int(i > 0 and e <= 0.0)])


def read_trajectories_csv(path) -> list[RetirementTrajectory]:
    paths: dict[str, list[float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            seq = paths.setdefault(row["cohort_start"], [])
            if int(row["month_index"]) != len(seq):
                raise ModelError(f"{path}: month_index out of order for {row['cohort_start']}")
            seq.append(float(row["equity_over_w"]))
    return [RetirementTrajectory.from_path(MonthIndex.parse(k), v) for k, v in paths.items()]


def write_report_json(report: BacktestReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
