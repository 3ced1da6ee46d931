"""Rebuild the published moment table, leverage table and cohort backtests.

Each builder returns a flat ``{cell_id: value}`` mapping plus display rows;
:func:`judge` compares the cells against a bundled manifest of expected
values and tolerances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .backtest import BacktestReport, PortfolioSpec, RetirementPlan, cohort_grid, run_cohorts
from .errors import DegenerateMomentsError
from .ingest import DataStore
from .leverage import LeverageQuote, levered_gamma, optimal_leverage_costly
from .model import annualized_withdrawal_rate, gamma2, gamma4, withdrawal_rate
from .series import MonthIndex, blend, compute_moments, reduced_sigma

S_DEFAULT = 0.003
T_DEFAULT = 360

ETF_SYMBOLS = ("SPY", "AGG", "SHV", "SHY", "IEI", "IEF", "TLH", "TLT")

PORTFOLIOS = {
    "60/40": {"stocks": 0.6, "bonds": 0.4},
    "100/0": {"stocks": 1.0},
    "0/100": {"bonds": 1.0},
}

LEVERED_START = MonthIndex(1934, 1)
EFFR_START = MonthIndex(1954, 7)
UNLEVERED_GRID = (MonthIndex(1871, 1), MonthIndex(1995, 1))
LEVERED_GRID = (MonthIndex(1934, 1), MonthIndex(1995, 1))


def load_manifest(target: str) -> dict:
    text = resources.files("decumulation").joinpath("expected", f"{target}.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class CheckResult:
    id: str
    kind: str
    computed: Optional[float]
    expected: Optional[float]
    tol: Optional[float]
    passed: Optional[bool]
    note: str = ""

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "info"}[self.passed]
        comp = "missing" if self.computed is None else f"{self.computed:.6g}"
        exp = "" if self.expected is None else f" expected {self.expected:.6g}"
        tol = "" if self.tol is None else f" ({self.kind} {self.tol:g})"
        return f"[{status}] {self.id}: {comp}{exp}{tol}"


def _check(kind, computed, expected, tol) -> Optional[bool]:
    if kind == "info":
        return None
    if computed is None or (isinstance(computed, float) and math.isnan(computed)):
        return False
    if kind == "abs":
        return abs(computed - expected) <= tol
    if kind == "rel":
        return abs(computed - expected) <= tol * abs(expected)
    if kind == "le":
        return computed <= expected
    if kind == "lt":
        return computed < expected
    if kind == "gt":
        return computed > expected
    if kind == "ge":
        return computed >= expected
    raise ValueError(f"unknown check kind {kind!r}")


def judge(cells: dict, manifest: dict) -> list[CheckResult]:
    out = []
    for c in manifest["checks"]:
        computed = cells.get(c["id"])
        kind = c.get("kind", "abs")
        out.append(
            CheckResult(
                c["id"], kind, computed, c.get("expected"), c.get("tol"),
                _check(kind, computed, c.get("expected"), c.get("tol")), c.get("note", ""),
            )
        )
    return out


def _table1_series(store: DataStore):
    yield "shiller_sp", "Shiller S&P", store.stocks()
    yield "shiller_gs10", "Shiller GS10", store.bonds()
    for sym in ETF_SYMBOLS:
        yield sym.lower(), sym, store.etf(sym)


def moment_row(label, series, s=S_DEFAULT) -> dict:
    m = compute_moments(series)
    row = {
        "series": label,
        "start": str(series.start),
        "n": m.n,
        "mean": m.mean,
        "variance": m.variance,
        "skewness": m.skewness,
        "kurtosis": m.kurtosis,
        "sigma_tilde": reduced_sigma(m),
        "gamma2": gamma2(m, s).value,
    }
    try:
        row["gamma4"] = gamma4(m, s).value
    except DegenerateMomentsError:
        row["gamma4"] = None
    return row


def build_table1(store: DataStore, s: float = S_DEFAULT):
    rows, cells = [], {}
    for key, label, series in _table1_series(store):
        row = moment_row(label, series, s)
        rows.append(row)
        for col in ("n", "mean", "variance", "skewness", "kurtosis", "sigma_tilde", "gamma2", "gamma4"):
            cells[f"{key}.{col}"] = row[col]
    return rows, cells


def plan_figures(m, s, t, l=1.0, quote: Optional[LeverageQuote] = None) -> dict:
    g = levered_gamma(m, s, l, quote) if quote is not None else gamma2(m, s)
    cw = withdrawal_rate(g, t)
    return {"l": l, "gamma": g.value, "cw": cw, "awr": annualized_withdrawal_rate(cw, s)}


def _assets(store: DataStore):
    return {"stocks": store.stocks(), "bonds": store.bonds()}


def _portfolio(assets, weights, label):
    names = list(weights)
    return blend([assets[n] for n in names], [weights[n] for n in names], label=label)


def build_table2(store: DataStore, s: float = S_DEFAULT, t: int = T_DEFAULT):
    """Un-levered and cost-optimally levered gamma / c/W / AWR per portfolio."""
    assets = _assets(store)
    tbill = store.cost("tbill")
    tbill_quote = LeverageQuote.from_series(tbill.window(LEVERED_START))
    effr = store.cost("effr", spread_bp=100.0)
    effr_quote = LeverageQuote.from_series(effr.window(EFFR_START))
    cells = {
        "quote.tbill.mean": tbill_quote.mean_cost,
        "quote.tbill.var": tbill_quote.var_cost,
        "quote.effr100.mean": effr_quote.mean_cost,
        "quote.effr100.var": effr_quote.var_cost,
    }
    rows = []
    for name, weights in PORTFOLIOS.items():
        port = _portfolio(assets, weights, name)
        full = compute_moments(port)
        late = compute_moments(port.window(LEVERED_START))
        post54 = compute_moments(port.window(EFFR_START))
        key = name.replace("/", "_")
        unlev = plan_figures(full, s, t)
        cols = {"unlevered": unlev}
        for col, m, quote in (
            ("levered_1871", full, tbill_quote),
            ("levered_1934", late, tbill_quote),
            ("levered_effr", post54, effr_quote),
        ):
            try:
                l = optimal_leverage_costly(m, quote)
                cols[col] = plan_figures(m, s, t, l, quote)
            except ValueError:
                cols[col] = {"l": None, "gamma": None, "cw": None, "awr": None}
        cells[f"{key}.mean"] = full.mean
        cells[f"{key}.variance"] = full.variance
        for col, vals in cols.items():
            for k, v in vals.items():
                if col == "unlevered" and k == "l":
                    continue
                cells[f"{key}.{col}.{k}"] = v
        rows.append({"portfolio": name, **{f"{c}.{k}": v for c, vs in cols.items() for k, v in vs.items()}})
    return rows, cells


@dataclass(frozen=True, eq=False)
class Panel:
    portfolio: str
    column: str
    leverage: float
    initial_withdrawal: float
    report: BacktestReport


def build_figure1(store: DataStore, s: float = S_DEFAULT, t: int = T_DEFAULT, workers: int = 1):
    """Nine cohort backtests: three portfolios by (un-levered, two levered)."""
    _, t2 = build_table2(store, s, t)
    assets = _assets(store)
    tbill = store.cost("tbill")
    panels = []
    cells = {}
    for name, weights in PORTFOLIOS.items():
        key = name.replace("/", "_")
        for column in ("unlevered", "levered_1871", "levered_1934"):
            cw = t2[f"{key}.{column}.cw"]
            if cw is None:
                continue
            if column == "unlevered":
                spec = PortfolioSpec(weights)
                grid = cohort_grid(*UNLEVERED_GRID)
                l = 1.0
            else:
                l = t2[f"{key}.{column}.l"]
                spec = PortfolioSpec(weights, leverage=l, cost=tbill)
                grid = cohort_grid(*LEVERED_GRID)
            report = run_cohorts(
                spec, RetirementPlan(cw, s, t), grid, assets, workers=workers,
                label=f"{name} {column} l={l:.2f} c/W={cw:.5f}",
            )
            panels.append(Panel(name, column, l, cw, report))
            p = f"{key}.{column}"
            cells[f"{p}.cohorts"] = report.cohort_count
            cells[f"{p}.failure_rate"] = report.failure_rate
            cells[f"{p}.mean_terminal"] = report.mean_terminal
            cells[f"{p}.median_terminal"] = report.median_terminal
            fb = report.first_breaches
            cells[f"{p}.first_breach_min"] = min(fb) if fb else math.inf
        for column in ("levered_1871", "levered_1934"):
            lev = cells.get(f"{key}.{column}.failure_rate")
            unl = cells.get(f"{key}.unlevered.failure_rate")
            if lev is not None and unl is not None:
                cells[f"{key}.{column}.failure_rate_minus_unlevered"] = lev - unl
    return panels, cells
