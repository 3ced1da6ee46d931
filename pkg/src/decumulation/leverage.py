"""Gamma under leverage and the gamma-maximizing leverage ratios.

Borrowing cost q is assumed uncorrelated with the asset return r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ModelError
from .model import GammaValue
from .series import MomentSummary, MonthlyReturnSeries, compute_moments


@dataclass(frozen=True, eq=False)
class LeverageQuote:
    """Mean and variance of the monthly borrowing rate."""

    mean_cost: float = 0.0
    var_cost: float = 0.0
    source: Optional[MonthlyReturnSeries] = None

    def __post_init__(self):
        if not self.var_cost >= 0:
            raise ModelError(f"cost variance must be >= 0, got {self.var_cost}")
        if not self.mean_cost > -1:
            raise ModelError(f"mean cost must exceed -1, got {self.mean_cost}")

    @classmethod
    def from_series(cls, q: MonthlyReturnSeries) -> "LeverageQuote":
        m = compute_moments(q)
        return cls(m.mean, m.variance, q)


FREE = LeverageQuote()


def levered_gamma(
    m: MomentSummary, s: float, l: float, quote: LeverageQuote = FREE
) -> GammaValue:
    """Second-order gamma of the levered return l*r - (l-1)*q."""
    if l < 0:
        raise ModelError(f"leverage must be >= 0, got {l}")
    b = l - 1.0
    denom = 1.0 + l * m.mean - b * quote.mean_cost
    if not denom > 0:
        raise ModelError(f"leverage {l} drives 1 + E[levered return] to {denom}")
    num = 1.0 + l * l * m.variance + b * b * quote.var_cost
    return GammaValue(1.0 - (1.0 + s) * num / denom, 2, m, s)


def levered_gamma_array(m: MomentSummary, s: float, l: np.ndarray, quote: LeverageQuote = FREE):
    """Vectorised :func:`levered_gamma` (no validity checks)."""
    l = np.asarray(l, dtype=float)
    b = l - 1.0
    num = 1.0 + l * l * m.variance + b * b * quote.var_cost
    denom = 1.0 + l * m.mean - b * quote.mean_cost
    return 1.0 - (1.0 + s) * num / denom


def optimal_leverage_free(m: MomentSummary) -> float:
    """Gamma-maximizing leverage with interest-free borrowing.

    Evaluates (sqrt(1 + E^2/V) - 1) / E in the rationalised form
    E / (V (sqrt(1 + E^2/V) + 1)), which is exact at E = 0.
    """
    if m.variance <= 0:
        raise ModelError("optimal leverage is unbounded when variance is zero")
    if m.mean < 0:
        raise ModelError(f"free-leverage optimum requires E[r] >= 0, got {m.mean}")
    e, v = m.mean, m.variance
    return e / (v * (math.sqrt(1.0 + e * e / v) + 1.0))


def optimal_leverage_costly(m: MomentSummary, quote: LeverageQuote) -> float:
    """Gamma-maximizing leverage when borrowing costs q per month.

    The textbook expression divides by E[r] - E[q]; here it is rationalised
    so that the E[r] -> E[q] limit (Var[q] / (V[r] + Var[q])) needs no branch.
    """
    e, v = m.mean, m.variance
    eq, vq = quote.mean_cost, quote.var_cost
    d = e - eq
    if not d > 0:
        raise ModelError(
            f"costly-leverage optimum requires E[r] > E[q]; E[r]={e}, E[q]={eq}"
        )
    total_var = v + vq
    if not total_var > 0:
        raise ModelError("optimal leverage is unbounded when V[r] + Var[q] is zero")
    a = 1.0 + eq
    eps = (2.0 * a * d * vq + d * d * (1.0 + vq)) / total_var
    return (2.0 * a * vq + d * (1.0 + vq)) / (total_var * (math.sqrt(a * a + eps) + a))


def optimal_leverage_costly_textbook(m: MomentSummary, quote: LeverageQuote) -> float:
    """The same optimum evaluated literally, for cross-checking away from E[r] = E[q]."""
    e, v = m.mean, m.variance
    eq, vq = quote.mean_cost, quote.var_cost
    inner = ((1 + eq) ** 2 * v + (1 + e) ** 2 * vq + (e - eq) ** 2) / (v + vq)
    return (math.sqrt(inner) - (1 + eq)) / (e - eq)
