"""Price ingestion, return panels, and annualized moment estimation.

Prices arrive as CSV (wide ``date,TICKER,...`` or long ``date,ticker,adj_close``)
from a file path or a plain-GET URL.  Daily log returns are computed on the
strict date intersection of all series; annualized moments use a configurable
trading-day scale (default 252) and the T-1 sample covariance.
"""

from __future__ import annotations

import csv
import io
import math
import urllib.request
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import DataError

_MODULE = "market-data"

DEFAULT_TRADING_DAYS = 252


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PriceSeries:
    """One ticker's adjusted-close history, dates strictly increasing."""

    ticker: str
    dates: tuple[date, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prices", _readonly(self.prices))
        if len(self.dates) != self.prices.shape[0]:
            raise DataError(_MODULE, "PriceSeries", f"{self.ticker}: {len(self.dates)} dates vs {self.prices.shape[0]} prices")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur <= prev:
                raise DataError(_MODULE, "PriceSeries", f"{self.ticker}: dates not strictly increasing at {cur}")
        if self.prices.size and (not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0.0)):
            bad = int(np.argmin((self.prices > 0.0) & np.isfinite(self.prices)))
            raise DataError(_MODULE, "PriceSeries", f"{self.ticker}: non-positive or non-finite price {self.prices[bad]!r} at {self.dates[bad]}")

    def __len__(self) -> int:
        return self.prices.shape[0]


@dataclass(frozen=True)
class ReturnPanel:
    """Date-aligned T x N matrix of daily log returns."""

    tickers: tuple[str, ...]
    dates: tuple[date, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "returns", _readonly(self.returns))
        t, n = self.returns.shape
        if t != len(self.dates) or n != len(self.tickers):
            raise DataError(_MODULE, "ReturnPanel", f"shape {self.returns.shape} vs {len(self.dates)} dates x {len(self.tickers)} tickers")
        if not np.all(np.isfinite(self.returns)):
            raise DataError(_MODULE, "ReturnPanel", "non-finite return entry")
        if len(set(self.tickers)) != len(self.tickers):
            dupe = next(t for i, t in enumerate(self.tickers) if t in self.tickers[:i])
            raise DataError(_MODULE, "ReturnPanel", f"duplicate ticker {dupe!r}")

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    @property
    def n_obs(self) -> int:
        return len(self.dates)

    def column(self, ticker: str) -> np.ndarray:
        try:
            return self.returns[:, self.tickers.index(ticker)]
        except ValueError:
            raise DataError(_MODULE, "ReturnPanel", f"unknown ticker {ticker!r}") from None

    def select(self, tickers: list[str] | tuple[str, ...]) -> "ReturnPanel":
        """Column-subset panel in the requested ticker order."""
        idx = [self.tickers.index(t) if t in self.tickers else -1 for t in tickers]
        if -1 in idx:
            missing = tickers[idx.index(-1)]
            raise DataError(_MODULE, "select", f"unknown ticker {missing!r}")
        return ReturnPanel(tuple(tickers), self.dates, self.returns[:, idx].copy())


@dataclass(frozen=True)
class MomentEstimates:
    """Annualized mean vector and covariance matrix."""

    mu: np.ndarray
    sigma: np.ndarray
    trading_days_per_year: int = DEFAULT_TRADING_DAYS
    tickers: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "mu", _readonly(self.mu))
        sig = np.asarray(self.sigma, dtype=np.float64)
        # symmetrize, then verify PSD up to scaled roundoff
        sig = 0.5 * (sig + sig.T)
        object.__setattr__(self, "sigma", _readonly(sig))
        if sig.shape != (self.mu.shape[0], self.mu.shape[0]):
            raise DataError(_MODULE, "MomentEstimates", f"sigma shape {sig.shape} vs mu length {self.mu.shape[0]}")
        eigs = np.linalg.eigvalsh(sig)
        largest = max(eigs[-1], 0.0)
        if eigs[0] < -1e-10 * max(largest, 1e-300):
            raise DataError(_MODULE, "MomentEstimates", f"sigma not PSD: smallest eigenvalue {eigs[0]:.3e}")

    @property
    def n_assets(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    """Train/test partition of a panel at a boundary date (boundary in train)."""

    boundary_date: date
    train: ReturnPanel
    test: ReturnPanel


def _parse_date(text: str, operation: str) -> date:
    text = text.strip()
    try:
        if len(text) == 8 and text.isdigit():
            return date(int(text[:4]), int(text[4:6]), int(text[6:]))
        return date.fromisoformat(text)
    except ValueError:
        raise DataError(_MODULE, operation, f"unparseable date {text!r}") from None


def _read_csv_text(source: str, operation: str) -> str:
    if source.startswith(("http://", "https://")):
        try:
            with urllib.request.urlopen(source) as resp:
                return resp.read().decode("utf-8")
        except Exception as exc:
            raise DataError(_MODULE, operation, f"fetch failed for {source!r}: {exc}") from exc
    try:
        with open(source, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(_MODULE, operation, f"unreadable source {source!r}: {exc}") from exc


def load_prices(source: str) -> list[PriceSeries]:
    """Load one PriceSeries per ticker from a CSV file path or URL.

    Accepts wide layout (``date`` column plus one column per ticker) or long
    layout (``date,ticker,adj_close``).  Blank cells are omitted from that
    ticker's series; non-positive prices are rejected with the offending row.
    """
    op = "load_prices"
    text = _read_csv_text(source, op)
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DataError(_MODULE, op, f"{source!r}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    lower = [h.lower() for h in header]

    by_ticker: dict[str, list[tuple[date, float]]] = {}
    if "ticker" in lower:
        t_col = lower.index("ticker")
        d_col = next((i for i, h in enumerate(lower) if h in ("date", "")), 0)
        p_col = next((i for i, h in enumerate(lower) if h in ("adj_close", "adjclose", "adj close", "close", "price")), None)
        if p_col is None:
            raise DataError(_MODULE, op, "long-format CSV needs an adj_close (or close/price) column")
        for ln, row in enumerate(rows[1:], start=2):
            d = _parse_date(row[d_col], op)
            tick = row[t_col].strip()
            cell = row[p_col].strip()
            if not cell:
                continue
            px = _parse_price(cell, tick, ln, op)
            by_ticker.setdefault(tick, []).append((d, px))
    else:
        d_col = next((i for i, h in enumerate(lower) if h in ("date", "")), 0)
        tick_cols = [(i, header[i]) for i in range(len(header)) if i != d_col]
        if not tick_cols:
            raise DataError(_MODULE, op, "wide-format CSV needs at least one ticker column")
        for ln, row in enumerate(rows[1:], start=2):
            d = _parse_date(row[d_col], op)
            for i, tick in tick_cols:
                cell = row[i].strip() if i < len(row) else ""
                if not cell:
                    continue
                px = _parse_price(cell, tick, ln, op)
                by_ticker.setdefault(tick, []).append((d, px))

    out = []
    for tick, obs in by_ticker.items():
        obs.sort(key=lambda o: o[0])
        dates = tuple(o[0] for o in obs)
        if len(set(dates)) != len(dates):
            raise DataError(_MODULE, op, f"{tick}: duplicate dates in source")
        out.append(PriceSeries(tick, dates, np.array([o[1] for o in obs])))
    return out


def _parse_price(cell: str, ticker: str, line_no: int, operation: str) -> float:
    try:
        px = float(cell)
    except ValueError:
        raise DataError(_MODULE, operation, f"{ticker}: unparseable price {cell!r} at row {line_no}") from None
    if not math.isfinite(px) or px <= 0.0:
        raise DataError(_MODULE, operation, f"{ticker}: non-positive price {cell} at row {line_no}")
    return px


def align(series: list[PriceSeries]) -> list[PriceSeries]:
    """Restrict every series to the common date intersection."""
    op = "align"
    if not series:
        raise DataError(_MODULE, op, "no series to align")
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    if len(common) < 2:
        raise DataError(_MODULE, op, f"only {len(common)} common dates; need at least 2")
    keep = sorted(common)
    out = []
    for s in series:
        pos = {d: i for i, d in enumerate(s.dates)}
        idx = [pos[d] for d in keep]
        out.append(PriceSeries(s.ticker, tuple(keep), s.prices[idx]))
    return out


def log_returns(series: list[PriceSeries]) -> ReturnPanel:
    """Daily log returns ln(P_t / P_{t-1}) of an aligned series list."""
    op = "log_returns"
    if not series:
        raise DataError(_MODULE, op, "no series")
    dates0 = series[0].dates
    for s in series[1:]:
        if s.dates != dates0:
            raise DataError(_MODULE, op, f"{s.ticker}: dates not aligned with {series[0].ticker}; call align() first")
    if len(dates0) < 2:
        raise DataError(_MODULE, op, "need at least 2 aligned dates")
    prices = np.column_stack([s.prices for s in series])
    rets = np.diff(np.log(prices), axis=0)
    return ReturnPanel(tuple(s.ticker for s in series), dates0[1:], rets)


def estimate_moments(panel: ReturnPanel, trading_days: int = DEFAULT_TRADING_DAYS) -> MomentEstimates:
    """Annualized mean vector and T-1 sample covariance of a return panel."""
    op = "estimate_moments"
    if trading_days <= 0:
        raise DataError(_MODULE, op, f"trading_days must be positive, got {trading_days}")
    if panel.n_obs < 2:
        raise DataError(_MODULE, op, f"need at least 2 observations, got {panel.n_obs}")
    mu = trading_days * panel.returns.mean(axis=0)
    centered = panel.returns - panel.returns.mean(axis=0)
    sigma = trading_days * (centered.T @ centered) / (panel.n_obs - 1)
    return MomentEstimates(mu=mu, sigma=sigma, trading_days_per_year=trading_days, tickers=panel.tickers)


def split_panel(panel: ReturnPanel, boundary: date) -> SplitSpec:
    """Partition rows into train (date <= boundary) and test (date > boundary)."""
    op = "split_panel"
    n_train = sum(1 for d in panel.dates if d <= boundary)
    if n_train == 0:
        raise DataError(_MODULE, op, f"boundary {boundary} precedes the panel range {panel.dates[0]}..{panel.dates[-1]}; train side empty")
    if n_train == panel.n_obs:
        raise DataError(_MODULE, op, f"boundary {boundary} is at or past the panel range {panel.dates[0]}..{panel.dates[-1]}; test side empty")
    train = ReturnPanel(panel.tickers, panel.dates[:n_train], panel.returns[:n_train].copy())
    test = ReturnPanel(panel.tickers, panel.dates[n_train:], panel.returns[n_train:].copy())
    return SplitSpec(boundary_date=boundary, train=train, test=test)


def load_return_panel(source: str) -> ReturnPanel:
    """Convenience: load, align, and difference a price CSV in one call."""
    return log_returns(align(load_prices(source)))
