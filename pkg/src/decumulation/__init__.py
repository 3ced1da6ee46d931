"""Closed-form retirement decumulation model and historical cohort backtests."""

from .errors import DecumulationError, DegenerateMomentsError, IngestError, ModelError, WindowError
from .series import (
    MomentSummary,
    MonthIndex,
    MonthlyReturnSeries,
    align,
    blend,
    compute_moments,
    lever,
    reduced_sigma,
)
from .model import (
    PERPETUAL,
    GammaValue,
    PlanParams,
    annualized_withdrawal_rate,
    expected_w_over_c,
    gamma2,
    gamma4,
    longevity_haircut,
    withdrawal_rate,
)
from .montecarlo import Constant, Empirical, MCEstimate, Normal, TwoPoint, mc_expected_w_over_c
from .leverage import (
    LeverageQuote,
    levered_gamma,
    optimal_leverage_costly,
    optimal_leverage_free,
)
from .backtest import (
    BacktestReport,
    PortfolioSpec,
    RetirementPlan,
    RetirementTrajectory,
    cohort_grid,
    run_cohorts,
    simulate_retirement,
    summarize,
)

__version__ = "0.1.0"
