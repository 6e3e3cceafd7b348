"""Regenerate the bundled synthetic fixtures under src/frontierlab/data.

Asset returns follow a five-factor linear model with idiosyncratic noise, so
the generated price panel and factor panel agree with each other: regressing a
portfolio of these assets on the factor file recovers the blended loadings.
Everything is seeded, so reruns are byte-identical.

Usage: python scripts/generate_fixtures.py
"""

from __future__ import annotations

import os
from datetime import date, timedelta

import numpy as np
from numpy.random import Generator, Philox

SEED = 20230901
START = date(2023, 9, 1)
END = date(2025, 12, 31)

TICKERS = ["AAPL", "MSFT", "GOOG", "AMZN", "TSLA", "JPM", "GS", "BAC", "XOM", "WMT"]
RESIDUAL = "REST"

START_PRICES = {
    "AAPL": 181.0, "MSFT": 332.0, "GOOG": 137.0, "AMZN": 138.0, "TSLA": 248.0,
    "JPM": 147.0, "GS": 327.0, "BAC": 29.0, "XOM": 111.0, "WMT": 54.0, "REST": 100.0,
}

# daily expected log return per asset (annual drift ~ 7.5% to 22%)
DRIFT = {
    "AAPL": 0.00070, "MSFT": 0.00060, "GOOG": 0.00050, "AMZN": 0.00055, "TSLA": 0.00090,
    "JPM": 0.00045, "GS": 0.00050, "BAC": 0.00040, "XOM": 0.00035, "WMT": 0.00030,
    "REST": 0.00048,
}

# factor loadings: Mkt-RF, SMB, HML, RMW, CMA
BETAS = {
    "AAPL": (1.20, -0.30, -0.20, 0.30, 0.00),
    "MSFT": (1.10, -0.35, -0.25, 0.35, 0.05),
    "GOOG": (1.15, -0.30, -0.15, 0.20, -0.10),
    "AMZN": (1.25, -0.25, -0.30, -0.10, -0.20),
    "TSLA": (1.80, 0.10, -0.50, -0.40, -0.35),
    "JPM": (1.00, -0.10, 0.40, 0.15, 0.10),
    "GS": (1.15, -0.05, 0.35, 0.10, 0.00),
    "BAC": (1.10, 0.00, 0.45, 0.05, 0.05),
    "XOM": (0.70, -0.10, 0.50, 0.25, 0.30),
    "WMT": (0.50, -0.20, 0.10, 0.30, 0.15),
    "REST": (1.00, 0.00, 0.05, 0.10, 0.05),
}

IDIO_VOL = {
    "AAPL": 0.010, "MSFT": 0.009, "GOOG": 0.011, "AMZN": 0.013, "TSLA": 0.025,
    "JPM": 0.008, "GS": 0.010, "BAC": 0.010, "XOM": 0.009, "WMT": 0.007, "REST": 0.004,
}

FACTOR_MEAN = np.array([0.00050, 0.00002, 0.00003, 0.00002, 0.00001])
FACTOR_VOL = np.array([0.0090, 0.0040, 0.0050, 0.0030, 0.0030])
DAILY_RF = 0.00016  # about 4% annualized

MARKET_CAPS = {
    "AAPL": 3400.0, "MSFT": 3200.0, "GOOG": 2100.0, "AMZN": 1900.0, "TSLA": 800.0,
    "JPM": 600.0, "GS": 160.0, "BAC": 310.0, "XOM": 480.0, "WMT": 650.0,
}
TOTAL_MARKET_CAP = 52000.0


def weekdays(start: date, end: date) -> list[date]:
    out = []
    d = start
    while d <= end:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def main() -> None:
    dates = weekdays(START, END)
    t = len(dates)
    names = TICKERS + [RESIDUAL]
    gen = Generator(Philox(key=SEED))

    factors = FACTOR_MEAN + FACTOR_VOL * gen.standard_normal((t, 5))
    idio = gen.standard_normal((t, len(names)))

    returns = np.empty((t, len(names)))
    for j, name in enumerate(names):
        beta = np.array(BETAS[name])
        returns[:, j] = DRIFT[name] + (factors - FACTOR_MEAN) @ beta + IDIO_VOL[name] * idio[:, j]

    prices = np.empty((t + 1, len(names)))
    prices[0] = [START_PRICES[name] for name in names]
    prices[1:] = prices[0] * np.exp(np.cumsum(returns, axis=0))
    price_dates = [START - timedelta(days=1 if START.weekday() else 3)] + dates
    # nudge the seed date onto the prior weekday
    while price_dates[0].weekday() >= 5:
        price_dates[0] -= timedelta(days=1)

    out_dir = os.path.join(os.path.dirname(__file__), "..", "src", "frontierlab", "data")
    os.makedirs(out_dir, exist_ok=True)

    with open(os.path.join(out_dir, "prices.csv"), "w", encoding="utf-8") as fh:
        fh.write("date," + ",".join(TICKERS) + "\n")
        for i, d in enumerate(price_dates):
            row = ",".join(f"{prices[i, j]:.4f}" for j in range(len(TICKERS)))
            fh.write(f"{d.isoformat()},{row}\n")

    with open(os.path.join(out_dir, "prices_rest.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"date,{RESIDUAL}\n")
        j = names.index(RESIDUAL)
        for i, d in enumerate(price_dates):
            fh.write(f"{d.isoformat()},{prices[i, j]:.4f}\n")

    # factor file in percent with compact dates, to exercise both auto-detections
    with open(os.path.join(out_dir, "factors.csv"), "w", encoding="utf-8") as fh:
        fh.write("date,Mkt-RF,SMB,HML,RMW,CMA,RF\n")
        for i, d in enumerate(dates):
            cells = ",".join(f"{100.0 * factors[i, k]:.4f}" for k in range(5))
            fh.write(f"{d.strftime('%Y%m%d')},{cells},{100.0 * DAILY_RF:.4f}\n")

    with open(os.path.join(out_dir, "market_caps.csv"), "w", encoding="utf-8") as fh:
        fh.write("ticker,market_cap\n")
        for name in TICKERS:
            fh.write(f"{name},{MARKET_CAPS[name]:.1f}\n")
        fh.write(f"TOTAL,{TOTAL_MARKET_CAP:.1f}\n")

    print(f"wrote fixtures for {len(TICKERS)} tickers, {t} trading days, to {os.path.abspath(out_dir)}")


if __name__ == "__main__":
    main()
