"""Monte Carlo evaluation of E[W/c] under i.i.d. monthly returns.

This is a direct simulation of W/c = sum_i (1+s)^i / prod_{j<=i} (1+r_j), used
as an oracle for the closed-form approximations in :mod:`decumulation.model`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ModelError
from .model import PERPETUAL, PlanParams
from .series import MonthlyReturnSeries

MAX_RESAMPLE_FRACTION = 1e-4
BLOCK_SIZE = 4096


@dataclass(frozen=True)
class Normal:
    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.variance >= 0):
            raise ModelError(f"invalid normal parameters {self}")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(self.mean, math.sqrt(self.variance), size)


@dataclass(frozen=True)
class TwoPoint:
    """Return ``low`` with probability 1 - p_high, else ``high``."""

    low: float
    high: float
    p_high: float = 0.5

    def __post_init__(self):
        if not (0 <= self.p_high <= 1) or min(self.low, self.high) <= -1:
            raise ModelError(f"invalid two-point parameters {self}")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.where(rng.random(size) < self.p_high, self.high, self.low)


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not self.value > -1:
            raise ModelError(f"constant return must exceed -1, got {self.value}")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, float(self.value))


@dataclass(frozen=True, eq=False)
class Empirical:
    """I.i.d. bootstrap from the months of a return series."""

    series: MonthlyReturnSeries

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.choice(self.series.values, size=size, replace=True)


ReturnModel = Union[Normal, TwoPoint, Constant, Empirical]


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_paths: int
    resamples: int


def _block(model: ReturnModel, t: int, s: float, n: int, seed: np.random.SeedSequence):
    rng = np.random.default_rng(seed)
    if t == 1:
        return np.ones(n), 0
    r = model.sample(rng, (n, t - 1))
    resamples = 0
    bad = r <= -1.0
    while bad.any():
        k = int(bad.sum())
        resamples += k
        r[bad] = model.sample(rng, k)
        bad = r <= -1.0
    discount = np.cumprod(1.0 / (1.0 + r), axis=1)
    growth = (1.0 + s) ** np.arange(1, t)
    return 1.0 + discount @ growth, resamples


def mc_expected_w_over_c(
    model: ReturnModel,
    plan: PlanParams,
    n_paths: int,
    seed: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> MCEstimate:
    """Sample mean and standard error of W/c over ``n_paths`` independent paths.

    Paths are generated in fixed-size blocks, each with its own spawned seed,
    so the result does not depend on ``workers``.
    """
    if plan.t is PERPETUAL:
        raise ModelError("cannot simulate a perpetual horizon")
    if n_paths < 1:
        raise ModelError(f"n_paths must be positive, got {n_paths}")
    t = int(plan.t)
    sizes = [min(block_size, n_paths - i) for i in range(0, n_paths, block_size)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(model, t, plan.s, n, sd) for n, sd in zip(sizes, seeds)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _block(*a), jobs))
    else:
        results = [_block(*a) for a in jobs]
    values = np.concatenate([v for v, _ in results])
    resamples = sum(k for _, k in results)
    if resamples > MAX_RESAMPLE_FRACTION * n_paths * max(t - 1, 1):
        raise ModelError(
            f"{resamples} draws <= -100% had to be resampled; distribution too wide"
        )
    stderr = float(values.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.nan
    return MCEstimate(float(values.mean()), stderr, n_paths, resamples)
