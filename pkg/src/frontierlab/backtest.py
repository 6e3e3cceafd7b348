"""Out-of-sample evaluation of a fixed-weight portfolio."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .market_data import ReturnPanel
from .optimizer import PortfolioWeights

_MODULE = "backtest"

TRADING_DAYS = 252


def _readonly(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BacktestReport:
    daily_returns: np.ndarray
    cumulative_return: float
    sharpe: float
    max_drawdown: float
    wealth_curve: np.ndarray
    annualized_return: float = 0.0
    annualized_volatility: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "daily_returns", _readonly(self.daily_returns))
        object.__setattr__(self, "wealth_curve", _readonly(self.wealth_curve))

    def csv_row(self, name: str) -> str:
        return f"{name},{self.cumulative_return!r},{self.sharpe!r},{self.max_drawdown!r}"


def run_backtest(
    weights: PortfolioWeights,
    test_panel: ReturnPanel,
    risk_free: float = 0.0,
    buy_and_hold: bool = False,
    trading_days: int = TRADING_DAYS,
) -> BacktestReport:
    """Apply fixed weights to a return panel and report the standard analytics.

    Default is daily rebalancing to the target weights: the portfolio's daily
    log return is ln(sum_i w_i exp(r_it)), the exact aggregation of asset log
    returns for one day.  With buy_and_hold the initial positions drift and the
    daily series comes from the total-wealth path instead.
    """
    op = "run_backtest"
    missing = [t for t in weights.tickers if t not in test_panel.tickers]
    if missing:
        raise DataError(_MODULE, op, f"panel has no return series for {missing[0]!r}")
    if test_panel.n_obs < 2:
        raise DataError(_MODULE, op, f"need at least 2 observations, got {test_panel.n_obs}")
    panel = test_panel.select(list(weights.tickers))
    w = weights.w

    if buy_and_hold:
        holdings = w[None, :] * np.exp(np.cumsum(panel.returns, axis=0))
        wealth = np.concatenate([[1.0], holdings.sum(axis=1)])
        daily = np.diff(np.log(wealth))
    else:
        daily = np.log(np.exp(panel.returns) @ w)
        wealth = np.concatenate([[1.0], np.exp(np.cumsum(daily))])

    mean = float(daily.mean())
    sd = float(daily.std(ddof=1))
    excess = trading_days * mean - risk_free
    if sd <= 1e-300:
        sharpe = 0.0 if abs(excess) <= 1e-300 else math.copysign(math.inf, excess)
    else:
        sharpe = excess / (math.sqrt(trading_days) * sd)

    running_max = np.maximum.accumulate(wealth)
    max_dd = float(np.min(wealth / running_max - 1.0))
    return BacktestReport(
        daily_returns=daily,
        cumulative_return=float(wealth[-1] - 1.0),
        sharpe=float(sharpe),
        max_drawdown=max_dd,
        wealth_curve=wealth,
        annualized_return=trading_days * mean,
        annualized_volatility=math.sqrt(trading_days) * sd,
    )
