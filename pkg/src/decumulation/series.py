"""Calendar-aligned monthly return series and their sample moments."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateMomentsError, ModelError, WindowError

WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True, order=True)
class MonthIndex:
    """A calendar month. Ordering follows the calendar."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @property
    def ordinal(self) -> int:
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "MonthIndex":
        year, m0 = divmod(ordinal, 12)
        return cls(year, m0 + 1)

    @classmethod
    def parse(cls, text: str) -> "MonthIndex":
        """Parse ``YYYY-MM`` (or ``YYYY-MM-DD``) and Shiller's ``YYYY.MM``.

        In Shiller's fractional convention ``1871.1`` is October and
        ``1871.01`` is January.
        """
        text = text.strip()
        m = re.fullmatch(r"(\d{4})-(\d{1,2})(?:-\d{1,2})?", text)
        if m:
            return cls(int(m.group(1)), int(m.group(2)))
        m = re.fullmatch(r"(\d{4})\.(\d{1,2})", text)
        if m:
            frac = m.group(2)
            month = int(frac) * 10 if len(frac) == 1 else int(frac)
            return cls(int(m.group(1)), month)
        raise ValueError(f"unparseable month {text!r}")

    def __add__(self, months: int) -> "MonthIndex":
        return MonthIndex.from_ordinal(self.ordinal + int(months))

    def __sub__(self, other: "MonthIndex") -> int:
        return self.ordinal - other.ordinal

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def _as_month(m: Union[MonthIndex, str]) -> MonthIndex:
    return m if isinstance(m, MonthIndex) else MonthIndex.parse(m)


@dataclass(frozen=True, eq=False)
class MonthlyReturnSeries:
    """Simple per-month returns on consecutive calendar months."""

    label: str
    start: MonthIndex
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ModelError(f"{self.label}: series must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(vals)):
            raise ModelError(f"{self.label}: non-finite return")
        bad = np.flatnonzero(vals <= -1.0)
        if bad.size:
            raise ModelError(
                f"{self.label}: return <= -100% at {self.start + int(bad[0])}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> MonthIndex:
        """Last covered month (inclusive)."""
        return self.start + (len(self) - 1)

    def months(self) -> list[MonthIndex]:
        return [self.start + i for i in range(len(self))]

    def window(self, start=None, end=None) -> "MonthlyReturnSeries":
        """Restrict to ``[start, end]`` (inclusive, either bound optional)."""
        lo = self.start if start is None else max(_as_month(start), self.start)
        hi = self.end if end is None else min(_as_month(end), self.end)
        if hi < lo:
            raise WindowError(f"{self.label}: empty window {lo}..{hi}")
        i0 = lo - self.start
        return MonthlyReturnSeries(self.label, lo, self.values[i0 : i0 + (hi - lo) + 1])

    def with_values(self, values, label: Optional[str] = None) -> "MonthlyReturnSeries":
        return MonthlyReturnSeries(label or self.label, self.start, values)


def align(*series: MonthlyReturnSeries) -> list[MonthlyReturnSeries]:
    """Restrict every series to the intersection of their calendars."""
    if not series:
        raise WindowError("align() needs at least one series")
    lo = max(s.start for s in series)
    hi = min(s.end for s in series)
    if hi < lo:
        labels = ", ".join(s.label for s in series)
        raise WindowError(f"no common months among: {labels}")
    return [s.window(lo, hi) for s in series]


@dataclass(frozen=True)
class MomentSummary:
    """Mean, variance, standardized skewness and (non-excess) kurtosis.

    ``skewness``/``kurtosis`` are None for a zero-variance sample. ``n`` is
    None for moments supplied by hand rather than estimated.
    """

    mean: float
    variance: float
    skewness: Optional[float] = None
    kurtosis: Optional[float] = None
    n: Optional[int] = None

    def __post_init__(self):
        if not self.variance >= 0:
            raise ModelError(f"variance must be >= 0, got {self.variance}")
        if self.n is not None and self.n < 2:
            raise ModelError(f"moment summary needs n >= 2, got {self.n}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def has_higher(self) -> bool:
        return self.skewness is not None and self.kurtosis is not None

    def require_higher(self) -> tuple[float, float]:
        if not self.has_higher:
            raise DegenerateMomentsError(
                "skewness/kurtosis absent (zero-variance sample or not supplied)"
            )
        return self.skewness, self.kurtosis


def compute_moments(series: Union[MonthlyReturnSeries, Iterable[float]]) -> MomentSummary:
    """Population (1/n) central moments of a return sample."""
    values = series.values if isinstance(series, MonthlyReturnSeries) else np.asarray(
        list(series), dtype=float
    )
    n = values.size
    if n < 2:
        raise ModelError(f"need at least 2 observations, got {n}")
    mean = float(values.mean())
    dev = values - mean
    m2 = float(np.mean(dev**2))
    if m2 == 0.0:
        return MomentSummary(mean=mean, variance=0.0, n=n)
    # standardise first so tiny variances do not underflow m2**2
    z = dev / np.sqrt(m2)
    return MomentSummary(
        mean=mean,
        variance=m2,
        skewness=float(np.mean(z**3)),
        kurtosis=float(np.mean(z**4)),
        n=n,
    )


def reduced_sigma(m: MomentSummary) -> float:
    """Standard deviation of 1 + r relative to its mean, sqrt(V) / (1 + E)."""
    if m.mean <= -1:
        raise ModelError(f"mean return must exceed -1, got {m.mean}")
    return math.sqrt(m.variance) / (1.0 + m.mean)


def blend(
    series_list: Sequence[MonthlyReturnSeries],
    weights: Sequence[float],
    label: Optional[str] = None,
) -> MonthlyReturnSeries:
    """Monthly-rebalanced portfolio: each month's return is the weighted sum."""
    if len(series_list) != len(weights) or not series_list:
        raise ModelError("blend needs one weight per series")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ModelError(f"weights must be non-negative: {list(weights)}")
    if abs(w.sum() - 1.0) > WEIGHT_TOLERANCE:
        raise ModelError(f"weights must sum to 1, got {w.sum()!r}")
    aligned = align(*series_list)
    values = np.zeros(len(aligned[0]))
    for wk, s in zip(w, aligned):
        values = values + wk * s.values
    if label is None:
        label = "+".join(f"{wk:g}*{s.label}" for wk, s in zip(w, aligned))
    return MonthlyReturnSeries(label, aligned[0].start, values)


def lever(
    series: MonthlyReturnSeries,
    l: float,
    cost: Union[MonthlyReturnSeries, float, None] = None,
) -> MonthlyReturnSeries:
    """Per-month levered return ``l*r - (l-1)*q``.

    ``cost`` is a q series (calendars intersected) or a constant, None meaning 0.
    """
    if l < 0:
        raise ModelError(f"leverage must be >= 0, got {l}")
    if isinstance(cost, MonthlyReturnSeries):
        r, q = align(series, cost)
        qv = q.values
    else:
        r, qv = series, float(cost or 0.0)
    values = l * r.values - (l - 1.0) * qv
    return MonthlyReturnSeries(f"{series.label}@{l:g}x", r.start, values)
