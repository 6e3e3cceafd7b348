"""Bundled synthetic fixtures: prices, factors, market caps, residual series.

The CSVs under ``frontierlab/data`` are generated once by
``scripts/generate_fixtures.py`` (seeded geometric random walks driven by a
five-factor model, so the price panel and the factor panel are mutually
consistent) and committed, which keeps every test and the demo pipeline
runnable without network access.
"""

from __future__ import annotations

from datetime import date
from importlib import resources

import numpy as np

from .errors import DataError
from .factors import FactorPanel, load_factors
from .market_data import (
    MomentEstimates,
    PriceSeries,
    ReturnPanel,
    align,
    estimate_moments,
    load_prices,
    log_returns,
)

TICKERS = ("AAPL", "MSFT", "GOOG", "AMZN", "TSLA", "JPM", "GS", "BAC", "XOM", "WMT")
RESIDUAL_SYMBOL = "REST"
DEFAULT_BOUNDARY = date(2025, 9, 30)
TOTAL_CAP_KEY = "TOTAL"


def fixture_path(name: str) -> str:
    """Filesystem path of a bundled data file."""
    path = resources.files("frontierlab").joinpath("data").joinpath(name)
    return str(path)


def bundled_prices() -> list[PriceSeries]:
    return load_prices(fixture_path("prices.csv"))


def bundled_residual_prices() -> list[PriceSeries]:
    return load_prices(fixture_path("prices_rest.csv"))


def bundled_factors() -> FactorPanel:
    return load_factors(fixture_path("factors.csv"))


def bundled_market_caps() -> tuple[dict[str, float], float]:
    """Per-ticker market caps and the total market cap, from the caps CSV."""
    caps: dict[str, float] = {}
    total = None
    with open(fixture_path("market_caps.csv"), encoding="utf-8") as fh:
        header = fh.readline()
        if "ticker" not in header:
            raise DataError("app-interface", "bundled_market_caps", "caps CSV missing its header")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, value = line.split(",")
            if name == TOTAL_CAP_KEY:
                total = float(value)
            else:
                caps[name] = float(value)
    if total is None:
        raise DataError("app-interface", "bundled_market_caps", f"caps CSV has no {TOTAL_CAP_KEY} row")
    return caps, total


def bundled_panel() -> ReturnPanel:
    return log_returns(align(bundled_prices()))


def bundled_residual_panel() -> ReturnPanel:
    return log_returns(align(bundled_residual_prices()))


def bundled_moments(trading_days: int = 252) -> MomentEstimates:
    return estimate_moments(bundled_panel(), trading_days)


def five_asset_moments() -> MomentEstimates:
    """Hand-calibrated 5-asset moments for the random-search experiments.

    The volatility spread makes the unconstrained minimum lean hard on the two
    low-vol assets, so a 0.3 cap pins them both at the bound.  That corner is
    exactly where uniform simplex samples are scarce, which is what makes the
    constrained search measurably slower than the unconstrained one.
    """
    tickers = ("A", "B", "C", "D", "E")
    mu = np.array([0.16, 0.14, 0.13, 0.09, 0.08])
    vols = np.array([0.13, 0.28, 0.33, 0.20, 0.36])
    corr = np.full((5, 5), 0.2)
    np.fill_diagonal(corr, 1.0)
    sigma = np.outer(vols, vols) * corr
    return MomentEstimates(mu=mu, sigma=sigma, tickers=tickers)
