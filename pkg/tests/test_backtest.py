"""Out-of-sample evaluation: wealth curves, drawdown, Sharpe."""

import math
from datetime import date

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frontierlab.backtest import BacktestReport, run_backtest
from frontierlab.config import RunConfig
from frontierlab.errors import DataError
from frontierlab.market_data import (
    PriceSeries,
    ReturnPanel,
    align,
    estimate_moments,
    log_returns,
    split_panel,
)
from frontierlab.optimizer import Bounds, PortfolioWeights, solve_gmv


def one_asset(weight_ticker: str = "A") -> PortfolioWeights:
    return PortfolioWeights((weight_ticker,), np.array([1.0]), Bounds.box(1), 0.0, {})


def panel_from_prices(prices: list[float], ticker: str = "A") -> ReturnPanel:
    days = tuple(date.fromordinal(738600 + i) for i in range(len(prices)))
    return log_returns(align([PriceSeries(ticker, days, np.asarray(prices, dtype=float))]))


def random_panel(rng: np.random.Generator, t: int = 60, n: int = 3) -> ReturnPanel:
    days = tuple(date.fromordinal(738600 + i) for i in range(t))
    tickers = tuple("ABCDEF"[:n])
    return ReturnPanel(tickers, days, rng.normal(0.0004, 0.01, (t, n)))


class TestAnalyticCases:
    def test_single_dip_drawdown(self):
        report = run_backtest(one_asset(), panel_from_prices([100.0, 110.0, 99.0, 105.0]))
        assert abs(report.max_drawdown - (99.0 / 110.0 - 1.0)) < 1e-12
        assert abs(report.cumulative_return - 0.05) < 1e-12
        npt.assert_allclose(report.wealth_curve, [1.0, 1.1, 0.99, 1.05], atol=1e-12)
        assert report.wealth_curve[0] == 1.0

    def test_constant_return_quarter(self):
        days = tuple(date.fromordinal(738600 + i) for i in range(63))
        panel = ReturnPanel(("A",), days, np.full((63, 1), 0.001))
        report = run_backtest(one_asset(), panel)
        assert report.cumulative_return == pytest.approx(math.expm1(0.063), rel=1e-12)
        assert report.max_drawdown == 0.0

    def test_monotone_wealth_has_zero_drawdown(self, rng):
        days = tuple(date.fromordinal(738600 + i) for i in range(40))
        panel = ReturnPanel(("A",), days, np.abs(rng.normal(0, 0.01, (40, 1))))
        assert run_backtest(one_asset(), panel).max_drawdown == 0.0

    def test_cumulative_is_final_wealth(self, rng):
        report = run_backtest(one_asset(), random_panel(rng, n=1))
        assert report.cumulative_return == pytest.approx(report.wealth_curve[-1] - 1.0, abs=1e-12)

    def test_drawdown_never_positive(self, rng):
        for _ in range(20):
            report = run_backtest(one_asset(), random_panel(rng, t=30, n=1))
            assert report.max_drawdown <= 0.0


class TestSharpe:
    def test_antisymmetric_in_return_sign(self, rng):
        w = PortfolioWeights(("A", "B", "C"), np.array([0.5, 0.3, 0.2]), Bounds.box(3), 0.0, {})
        base = run_backtest(w, random_panel(rng, t=80))
        flipped = ReturnPanel(("P",), random_panel(rng, t=80).dates[:80],
                              -base.daily_returns[:, None])
        mirrored = run_backtest(one_asset("P"), flipped)
        assert abs(base.sharpe + mirrored.sharpe) < 1e-12

    def test_risk_free_shifts_numerator_only(self, rng):
        panel = random_panel(rng, n=1)
        plain = run_backtest(one_asset(), panel, risk_free=0.0)
        shifted = run_backtest(one_asset(), panel, risk_free=0.03)
        expected = plain.sharpe - 0.03 / plain.annualized_volatility
        assert shifted.sharpe == pytest.approx(expected, abs=1e-12)
        assert shifted.max_drawdown == plain.max_drawdown

    def test_zero_volatility_conventions(self):
        days = tuple(date.fromordinal(738600 + i) for i in range(10))
        flat = ReturnPanel(("A",), days, np.zeros((10, 1)))
        assert run_backtest(one_asset(), flat).sharpe == 0.0
        up = ReturnPanel(("A",), days, np.full((10, 1), 0.002))
        assert run_backtest(one_asset(), up).sharpe == math.inf
        down = ReturnPanel(("A",), days, np.full((10, 1), -0.002))
        assert run_backtest(one_asset(), down).sharpe == -math.inf

    def test_annualization_factors(self, rng):
        report = run_backtest(one_asset(), random_panel(rng, n=1))
        daily = report.daily_returns
        assert report.annualized_return == pytest.approx(252 * daily.mean(), abs=1e-14)
        assert report.annualized_volatility == pytest.approx(
            math.sqrt(252) * daily.std(ddof=1), abs=1e-14)
        assert report.sharpe == pytest.approx(
            report.annualized_return / report.annualized_volatility, abs=1e-12)


class TestRebalancingModes:
    def test_daily_return_is_exact_aggregation(self, rng):
        panel = random_panel(rng)
        w = PortfolioWeights(panel.tickers, np.array([0.2, 0.5, 0.3]), Bounds.box(3), 0.0, {})
        report = run_backtest(w, panel)
        for t in range(panel.n_obs):
            manual = math.log(float(np.exp(panel.returns[t]) @ w.w))
            assert report.daily_returns[t] == pytest.approx(manual, abs=1e-15)

    def test_modes_agree_for_single_asset(self, rng):
        panel = random_panel(rng, n=1)
        rebal = run_backtest(one_asset(), panel)
        hold = run_backtest(one_asset(), panel, buy_and_hold=True)
        npt.assert_allclose(rebal.wealth_curve, hold.wealth_curve, rtol=1e-12)

    def test_buy_and_hold_matches_drifting_holdings(self, rng):
        panel = random_panel(rng, t=50)
        w = PortfolioWeights(panel.tickers, np.array([0.6, 0.3, 0.1]), Bounds.box(3), 0.0, {})
        report = run_backtest(w, panel, buy_and_hold=True)
        holdings = w.w * np.ones(3)
        wealth = [1.0]
        for t in range(panel.n_obs):
            holdings = holdings * np.exp(panel.returns[t])
            wealth.append(float(holdings.sum()))
        npt.assert_allclose(report.wealth_curve, wealth, rtol=1e-12)

    def test_modes_differ_with_dispersion(self, rng):
        # with one asset trending up and one down, drifted holdings diverge
        # from the daily-rebalanced target within a couple of weeks
        days = tuple(date.fromordinal(738600 + i) for i in range(30))
        r = np.column_stack([np.full(30, 0.01), np.full(30, -0.01)])
        panel = ReturnPanel(("A", "B"), days, r)
        w = PortfolioWeights(("A", "B"), np.array([0.5, 0.5]), Bounds.box(2), 0.0, {})
        rebal = run_backtest(w, panel)
        hold = run_backtest(w, panel, buy_and_hold=True)
        assert abs(rebal.cumulative_return - hold.cumulative_return) > 1e-4


class TestInvariances:
    def test_column_permutation(self, rng):
        panel = random_panel(rng)
        weights = np.array([0.2, 0.5, 0.3])
        w = PortfolioWeights(panel.tickers, weights, Bounds.box(3), 0.0, {})
        base = run_backtest(w, panel)
        perm = [2, 0, 1]
        shuffled = ReturnPanel(tuple(panel.tickers[i] for i in perm),
                               panel.dates, panel.returns[:, perm])
        again = run_backtest(w, shuffled)
        assert again.cumulative_return == pytest.approx(base.cumulative_return, rel=1e-12)
        assert again.sharpe == pytest.approx(base.sharpe, rel=1e-12)
        assert again.max_drawdown == pytest.approx(base.max_drawdown, rel=1e-12)

    def test_price_scale_invariance(self):
        small = run_backtest(one_asset(), panel_from_prices([100.0, 110.0, 99.0, 105.0]))
        big = run_backtest(one_asset(), panel_from_prices([100000.0, 110000.0, 99000.0, 105000.0]))
        assert big.max_drawdown == pytest.approx(small.max_drawdown, rel=1e-12)
        assert big.cumulative_return == pytest.approx(small.cumulative_return, rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_report_shape_properties(self, seed):
        g = np.random.default_rng(seed)
        panel = random_panel(g, t=int(g.integers(2, 40)), n=2)
        w = PortfolioWeights(panel.tickers, np.array([0.4, 0.6]), Bounds.box(2), 0.0, {})
        report = run_backtest(w, panel)
        assert report.wealth_curve.shape == (panel.n_obs + 1,)
        assert report.wealth_curve[0] == 1.0
        assert report.max_drawdown <= 0.0
        assert report.cumulative_return == pytest.approx(report.wealth_curve[-1] - 1.0, abs=1e-12)


class TestValidationAndSerialization:
    def test_missing_ticker(self, rng):
        panel = random_panel(rng, n=2)
        w = PortfolioWeights(("A", "Z"), np.array([0.5, 0.5]), Bounds.box(2), 0.0, {})
        with pytest.raises(DataError, match="'Z'"):
            run_backtest(w, panel)

    def test_too_few_observations(self, rng):
        days = (date(2025, 1, 2),)
        panel = ReturnPanel(("A",), days, rng.normal(0, 0.01, (1, 1)))
        with pytest.raises(DataError, match="2 observations"):
            run_backtest(one_asset(), panel)

    def test_csv_row_round_trips(self, rng):
        report = run_backtest(one_asset(), random_panel(rng, n=1))
        row = report.csv_row("gmv")
        name, cum, sharpe, dd = row.split(",")
        assert name == "gmv"
        assert float(cum) == report.cumulative_return
        assert float(sharpe) == report.sharpe
        assert float(dd) == report.max_drawdown

    def test_report_arrays_frozen(self, rng):
        report = run_backtest(one_asset(), random_panel(rng, n=1))
        with pytest.raises(ValueError):
            report.wealth_curve[0] = 2.0
        with pytest.raises(ValueError):
            report.daily_returns[0] = 0.0


class TestBundledFixture:
    """Constrained GMV fitted before the split, evaluated after it."""

    def test_capped_gmv_out_of_sample(self, panel):
        split = split_panel(panel, RunConfig().boundary)
        assert split.test.n_obs == 66
        moments = estimate_moments(split.train, 252)
        n = panel.n_assets
        w = solve_gmv(moments, Bounds(np.zeros(n), np.full(n, 0.15)))
        report = run_backtest(w, split.test)
        assert report.cumulative_return == pytest.approx(0.1424560, abs=1e-6)
        assert report.sharpe == pytest.approx(3.392552, abs=1e-5)
        assert report.max_drawdown == pytest.approx(-0.0472520, abs=1e-6)
