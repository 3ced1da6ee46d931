"""Closed-form decumulation model: gamma, withdrawal rates, and their limits.

Every rate here is per period (monthly in the data-driven paths); only
:func:`annualized_withdrawal_rate` converts to an annual figure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ModelError
from .series import MomentSummary, reduced_sigma


class _Perpetual:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "PERPETUAL"


PERPETUAL = _Perpetual()
"""Horizon marker for a retirement that never ends."""

# Below this |gamma * t| the 0/0 in gamma / (1 - (1-gamma)^t) is replaced by 1/t.
GAMMA_ZERO_THRESHOLD = 1e-9

DEFAULT_S = 0.003
DEFAULT_T = 360


@dataclass(frozen=True)
class PlanParams:
    t: Union[int, _Perpetual] = DEFAULT_T
    s: float = DEFAULT_S

    def __post_init__(self):
        if self.t is not PERPETUAL:
            if int(self.t) != self.t or self.t < 1:
                raise ModelError(f"horizon must be a positive integer, got {self.t!r}")
        if not self.s > -1:
            raise ModelError(f"consumption growth must exceed -1, got {self.s}")

    @property
    def perpetual(self) -> bool:
        return self.t is PERPETUAL


@dataclass(frozen=True)
class GammaValue:
    """Per-period consumption- and variability-adjusted return."""

    value: float
    order: int
    moments: Optional[MomentSummary] = None
    s: Optional[float] = None

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ModelError(f"gamma order must be 2 or 4, got {self.order}")
        if not self.value < 1:
            raise ModelError(f"gamma must be < 1, got {self.value}")

    def __float__(self) -> float:
        return self.value


GammaLike = Union[GammaValue, float]
Horizon = Union[PlanParams, int, _Perpetual]


def _gamma(g: GammaLike) -> float:
    return float(g)


def _horizon(plan: Horizon):
    if isinstance(plan, PlanParams):
        return plan.t
    if plan is PERPETUAL:
        return plan
    return PlanParams(t=plan).t


def _check_mean(mean: float) -> None:
    if not mean > -1:
        raise ModelError(f"expected return must exceed -1, got {mean}")


def gamma2(m: MomentSummary, s: float) -> GammaValue:
    """Second-order gamma: (E - (s + V + sV)) / (1 + E)."""
    _check_mean(m.mean)
    value = (m.mean - (s + m.variance + s * m.variance)) / (1.0 + m.mean)
    return GammaValue(value, 2, m, s)


def gamma4(m: MomentSummary, s: float) -> GammaValue:
    """Fourth-order gamma, adding skewness and kurtosis corrections.

    Uses the reduced standard deviation form
    ``1 - (1+s)/(1+E) * (1 + st^2 (1 - st*S + st^2*K))``.
    With zero variance every correction vanishes, so absent higher moments
    are only an error when V > 0.
    """
    _check_mean(m.mean)
    if m.variance == 0.0:
        return GammaValue(1.0 - (1.0 + s) / (1.0 + m.mean), 4, m, s)
    skew, kurt = m.require_higher()
    st = reduced_sigma(m)
    drag = 1.0 + st * st * (1.0 - st * skew + st * st * kurt)
    value = 1.0 - (1.0 + s) / (1.0 + m.mean) * drag
    return GammaValue(value, 4, m, s)


def gamma4_moment_form(m: MomentSummary, s: float) -> float:
    """Fourth-order gamma written with raw V, sqrt(V) and (1+E) powers.

    Algebraically identical to :func:`gamma4`; kept as a cross-check.
    """
    _check_mean(m.mean)
    skew, kurt = m.require_higher()
    a = 1.0 + m.mean
    v = m.variance
    inner = 1.0 - math.sqrt(v) * skew / a + v * kurt / a**2
    return 1.0 - (1.0 + s) / a * (1.0 + v / a**2 * inner)


def _one_minus_decay(g: float, t: int) -> float:
    # 1 - (1-g)^t without cancellation for small g
    return -math.expm1(t * math.log1p(-g))


def withdrawal_rate(gamma: GammaLike, plan: Horizon) -> float:
    """First-period c/W = gamma / (1 - (1 - gamma)^t).

    Tends to 1/t as gamma -> 0 and to gamma itself for a perpetual plan.
    """
    g = _gamma(gamma)
    t = _horizon(plan)
    if not g < 1:
        raise ModelError(f"gamma must be < 1, got {g}")
    if t is PERPETUAL:
        if not 0 < g < 2:
            raise ModelError(f"no positive perpetual withdrawal rate for gamma={g}")
        return g
    if abs(g) * t < GAMMA_ZERO_THRESHOLD:
        return 1.0 / t
    return g / _one_minus_decay(g, t)


def expected_w_over_c(gamma: GammaLike, plan: Horizon) -> float:
    """E[W/c] = (1 - (1 - gamma)^t) / gamma, in units of first-period consumption."""
    g = _gamma(gamma)
    t = _horizon(plan)
    if not g < 1:
        raise ModelError(f"gamma must be < 1, got {g}")
    if t is PERPETUAL:
        if not 0 < g < 2:
            raise ModelError(f"E[W/c] diverges for a perpetual plan with gamma={g}")
        return 1.0 / g
    if abs(g) * t < GAMMA_ZERO_THRESHOLD:
        return float(t)
    return _one_minus_decay(g, t) / g


def annualized_withdrawal_rate(cw_month: float, s: float) -> float:
    """Total first-year consumption as a fraction of W: c/W * sum_{i<12} (1+s)^i."""
    if not s > -1:
        raise ModelError(f"consumption growth must exceed -1, got {s}")
    return cw_month * math.fsum((1.0 + s) ** i for i in range(12))


def longevity_haircut(gamma: GammaLike, plan: Horizon) -> float:
    """Fraction (1 - gamma)^t by which an endless retirement cuts c/W."""
    g = _gamma(gamma)
    t = _horizon(plan)
    if g > 1:
        raise ModelError(f"gamma must be <= 1, got {g}")
    if t is PERPETUAL:
        if not 0 < g < 2:
            raise ModelError(f"haircut undefined for a perpetual plan with gamma={g}")
        return 0.0
    return (1.0 - g) ** t
