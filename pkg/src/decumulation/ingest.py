"""Loading historical monthly data from local CSV files.

File layouts (all with a ``date`` column in ``YYYY-MM``, ``YYYY-MM-DD`` or
Shiller ``YYYY.MM`` form):

* ``shiller.csv``: date, sp_price, dividend, gs10_yield, cpi
* ``tbill.csv`` / ``effr.csv``: date, annual_rate_percent
* ``etf/<SYMBOL>.csv``: date, adjusted_close

A ``MANIFEST.json`` in the data directory pins the sha256 of each file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import IngestError, ModelError
from .series import MonthIndex, MonthlyReturnSeries, align

log = logging.getLogger(__name__)

DATA_ENV = "DECUMULATION_DATA"
MANIFEST_NAME = "MANIFEST.json"

SHILLER_COLUMNS = ("sp_price", "dividend", "gs10_yield", "cpi")
RATE_COLUMNS = ("annual_rate_percent",)
ETF_COLUMNS = ("adjusted_close",)

BOND_MATURITY_MONTHS = 120

__all__ = [
    "MonthlyTable",
    "RateSeries",
    "PriceSeries",
    "load_monthly_csv",
    "equity_total_returns",
    "bond_returns_from_gs10",
    "returns_from_prices",
    "monthly_cost",
    "align",
    "DataStore",
]


@dataclass(frozen=True, eq=False)
class MonthlyTable:
    """Contiguous months with float columns; missing cells are NaN."""

    path: str
    start: MonthIndex
    columns: dict

    def __len__(self) -> int:
        return len(next(iter(self.columns.values())))

    @property
    def end(self) -> MonthIndex:
        return self.start + (len(self) - 1)

    def months(self) -> list[MonthIndex]:
        return [self.start + i for i in range(len(self))]

    def span(self, *names: str) -> tuple[MonthIndex, list[np.ndarray]]:
        """Longest stretch where every named column is present.

        Leading and trailing gaps are trimmed; a gap in the middle is an error.
        """
        cols = [self.columns[n] for n in names]
        ok = np.all([np.isfinite(c) for c in cols], axis=0)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            raise IngestError(f"{self.path}: no rows with all of {names}")
        lo, hi = int(idx[0]), int(idx[-1])
        holes = np.flatnonzero(~ok[lo : hi + 1])
        if holes.size:
            raise IngestError(
                f"{self.path}: missing {names} value at {self.start + lo + int(holes[0])}"
            )
        return self.start + lo, [c[lo : hi + 1] for c in cols]


def _parse_cell(text: str) -> float:
    text = text.strip()
    if text == "" or text.upper() in ("NA", "NAN", "."):
        return math.nan
    return float(text.replace(",", ""))


def load_monthly_csv(path, schema: Sequence[str], date_column: str = "date") -> MonthlyTable:
    """Read a monthly CSV with the named numeric columns.

    Rows may appear in any order; the months must then be contiguous.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"{path}: file not found")
    rows: dict[int, list[float]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        missing = [c for c in (date_column, *schema) if c not in header]
        if missing:
            raise IngestError(f"{path}:1: header lacks columns {missing}")
        di = header.index(date_column)
        ci = [header.index(c) for c in schema]
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise IngestError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                month = MonthIndex.parse(row[di])
                vals = [_parse_cell(row[i]) for i in ci]
            except ValueError as exc:
                raise IngestError(f"{path}:{line}: {exc}") from None
            if month.ordinal in rows:
                raise IngestError(f"{path}:{line}: duplicate month {month}")
            rows[month.ordinal] = vals
    if not rows:
        raise IngestError(f"{path}: no data rows")
    ordinals = sorted(rows)
    for a, b in zip(ordinals, ordinals[1:]):
        if b != a + 1:
            raise IngestError(
                f"{path}: months not contiguous, gap between "
                f"{MonthIndex.from_ordinal(a)} and {MonthIndex.from_ordinal(b)}"
            )
    data = np.array([rows[o] for o in ordinals], dtype=float).reshape(len(ordinals), len(schema))
    columns = {name: data[:, k].copy() for k, name in enumerate(schema)}
    return MonthlyTable(str(path), MonthIndex.from_ordinal(ordinals[0]), columns)


@dataclass(frozen=True, eq=False)
class RateSeries:
    """Annualised percentage rates, one per month."""

    label: str
    start: MonthIndex
    annual_rates: np.ndarray

    def __post_init__(self):
        rates = np.array(self.annual_rates, dtype=float)
        if rates.size == 0 or not np.all(np.isfinite(rates)):
            raise ModelError(f"{self.label}: rates must be finite and non-empty")
        rates.setflags(write=False)
        object.__setattr__(self, "annual_rates", rates)

    def __len__(self):
        return self.annual_rates.size

    @property
    def end(self) -> MonthIndex:
        return self.start + (len(self) - 1)


@dataclass(frozen=True, eq=False)
class PriceSeries:
    label: str
    start: MonthIndex
    prices: np.ndarray

    def __post_init__(self):
        p = np.array(self.prices, dtype=float)
        if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ModelError(f"{self.label}: prices must be positive and finite")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)

    def __len__(self):
        return self.prices.size


def returns_from_prices(p: PriceSeries, drop_first: bool = False) -> MonthlyReturnSeries:
    """r_t = P_t / P_{t-1} - 1, dated at month t.

    ``drop_first`` discards the first return, for series whose first price
    is from a partial month.
    """
    vals = p.prices[1:] / p.prices[:-1] - 1.0
    start = p.start + 1
    if drop_first:
        vals, start = vals[1:], start + 1
    if vals.size == 0:
        raise ModelError(f"{p.label}: too few prices for a return")
    return MonthlyReturnSeries(p.label, start, vals)


def equity_total_returns(
    label: str, start: MonthIndex, prices, dividends
) -> MonthlyReturnSeries:
    """Nominal total return (P_t + D_t / 12) / P_{t-1} - 1 from an annualised dividend."""
    prices = np.asarray(prices, dtype=float)
    dividends = np.asarray(dividends, dtype=float)
    if prices.shape != dividends.shape:
        raise ModelError("price and dividend columns must be aligned")
    if np.any(prices <= 0):
        raise ModelError(f"{label}: non-positive price")
    vals = (prices[1:] + dividends[1:] / 12.0) / prices[:-1] - 1.0
    return MonthlyReturnSeries(label, start + 1, vals)


def par_bond_price(coupon_pct: float, yield_pct: float, months: int) -> float:
    """Price per 100 face of a bond paying coupon_pct/12 monthly for ``months`` months."""
    c = coupon_pct / 1200.0
    i = yield_pct / 1200.0
    if i == 0.0:
        return 100.0 * (1.0 + c * months)
    disc = (1.0 + i) ** -months
    return 100.0 * (c * (1.0 - disc) / i + disc)


def _modified_duration_years(yield_pct: float, months: int) -> float:
    # par bond: modified duration equals the annuity factor (in months)
    i = yield_pct / 1200.0
    if i == 0.0:
        return months / 12.0
    return (1.0 - (1.0 + i) ** -months) / i / 12.0


def bond_returns_from_gs10(
    yields: RateSeries, method: str = "par", maturity_months: int = BOND_MATURITY_MONTHS
) -> MonthlyReturnSeries:
    """Monthly total return of a constant-maturity par bond built from yields.

    ``method="par"``: buy a par bond at y_{t-1}, accrue one month's coupon,
    reprice the remaining ``maturity_months - 1`` months of cash flows at y_t.
    ``method="duration"``: y_{t-1}/1200 - D * (y_t - y_{t-1}) / 100.
    """
    y = yields.annual_rates
    if np.any(y <= -50):
        raise ModelError(f"{yields.label}: yields must exceed -50%")
    if len(y) < 2:
        raise ModelError(f"{yields.label}: need at least two yields")
    out = np.empty(len(y) - 1)
    for k in range(1, len(y)):
        prev, cur = float(y[k - 1]), float(y[k])
        if method == "par":
            price = par_bond_price(prev, cur, maturity_months - 1)
            if price <= 0:
                raise ModelError(f"{yields.label}: non-positive bond price at {yields.start + k}")
            out[k - 1] = (price + prev / 12.0 - 100.0) / 100.0
        elif method == "duration":
            dur = _modified_duration_years(prev, maturity_months)
            out[k - 1] = prev / 1200.0 - dur * (cur - prev) / 100.0
        else:
            raise ValueError(f"unknown bond method {method!r}")
    return MonthlyReturnSeries(yields.label, yields.start + 1, out)


def monthly_cost(rate: RateSeries, spread_bp_per_year: float = 0.0) -> MonthlyReturnSeries:
    """Monthly borrowing rate q_t = (annual_rate_t + spread/100) / 1200."""
    q = (rate.annual_rates + spread_bp_per_year / 100.0) / 1200.0
    label = rate.label if not spread_bp_per_year else f"{rate.label}+{spread_bp_per_year:g}bp"
    return MonthlyReturnSeries(label, rate.start, q)


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_ENV, "data"))


@dataclass
class DataStore:
    """A data directory whose files are checked against ``MANIFEST.json``."""

    root: Path = field(default_factory=default_data_dir)
    verify: bool = True

    def __post_init__(self):
        self.root = Path(self.root)
        self._digests = None

    @property
    def digests(self) -> dict:
        if self._digests is None:
            mpath = self.root / MANIFEST_NAME
            if mpath.is_file():
                try:
                    self._digests = json.loads(mpath.read_text())["files"]
                except (ValueError, KeyError) as exc:
                    raise IngestError(f"{mpath}: unreadable manifest ({exc})") from None
            else:
                self._digests = {}
        return self._digests

    def path(self, name: str) -> Path:
        p = self.root / name
        if not p.is_file():
            raise IngestError(f"{p}: file not found (set ${DATA_ENV} or --data-dir)")
        if self.verify:
            expected = self.digests.get(name)
            if expected is None:
                log.warning("%s has no pinned digest in %s", p, MANIFEST_NAME)
            else:
                actual = sha256_of(p)
                if actual != expected:
                    raise IngestError(
                        f"{p}: sha256 {actual} does not match pinned digest {expected}"
                    )
        return p

    def pin(self, names: Optional[Sequence[str]] = None) -> dict:
        """Record the current digest of every data file into the manifest."""
        if names is None:
            names = sorted(
                str(p.relative_to(self.root)).replace(os.sep, "/")
                for p in self.root.rglob("*.csv")
            )
        files = {n: sha256_of(self.root / n) for n in names}
        (self.root / MANIFEST_NAME).write_text(json.dumps({"files": files}, indent=2) + "\n")
        self._digests = files
        return files

    def shiller(self) -> MonthlyTable:
        return load_monthly_csv(self.path("shiller.csv"), SHILLER_COLUMNS)

    def stocks(self) -> MonthlyReturnSeries:
        tab = self.shiller()
        start, (p, d) = tab.span("sp_price", "dividend")
        return equity_total_returns("S&P", start, p, d)

    def gs10(self) -> RateSeries:
        start, (y,) = self.shiller().span("gs10_yield")
        return RateSeries("GS10", start, y)

    def bonds(self, method: str = "par") -> MonthlyReturnSeries:
        return _relabel(bond_returns_from_gs10(self.gs10(), method=method), "GS10 bond")

    def rate(self, name: str) -> RateSeries:
        tab = load_monthly_csv(self.path(f"{name}.csv"), RATE_COLUMNS)
        start, (r,) = tab.span("annual_rate_percent")
        return RateSeries(name, start, r)

    def cost(self, name: str = "tbill", spread_bp: float = 0.0) -> MonthlyReturnSeries:
        return monthly_cost(self.rate(name), spread_bp)

    def etf(self, symbol: str, drop_first: bool = True) -> MonthlyReturnSeries:
        tab = load_monthly_csv(self.path(f"etf/{symbol}.csv"), ETF_COLUMNS)
        start, (p,) = tab.span("adjusted_close")
        return returns_from_prices(PriceSeries(symbol, start, p), drop_first=drop_first)


def _relabel(s: MonthlyReturnSeries, label: str) -> MonthlyReturnSeries:
    return MonthlyReturnSeries(label, s.start, s.values)
