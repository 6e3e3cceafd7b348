"""Black-Litterman allocation: equilibrium prior, views, posterior, weights.

The chain is

    market weights w_mkt  ->  delta = (mu'w - rf) / (w'Sigma w)
                          ->  pi = delta * Sigma * w_mkt      (reverse optimization)
    views (P, Q, Omega)   ->  mu_BL, Sigma_BL                 (master equation)
                          ->  posterior-optimal weights

All expected returns in this module are annualized excess returns over the
configured risk-free rate; the conversion happens once when the prior is
built.  The master equation is evaluated through Cholesky factorizations of
tau*Sigma and of the transformed information matrix, never through an explicit
matrix inverse.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import DataError, InfeasibleError, SolverError
from .market_data import MomentEstimates, ReturnPanel, estimate_moments
from .optimizer import Bounds, PortfolioWeights, solve_utility

_MODULE = "blacklitterman"


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MarketPortfolio:
    """Cap-weighted market portfolio, including a residual bucket for everything unnamed."""

    tickers: tuple[str, ...]
    weights: np.ndarray
    returns: ReturnPanel
    residual_symbol: str

    def __post_init__(self):
        object.__setattr__(self, "weights", _readonly(self.weights))
        if self.weights.shape != (len(self.tickers),):
            raise DataError(_MODULE, "MarketPortfolio", f"{self.weights.shape[0]} weights vs {len(self.tickers)} tickers")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise DataError(_MODULE, "MarketPortfolio", f"market weights sum to {self.weights.sum()!r}")
        if np.any(self.weights < -1e-12):
            raise DataError(_MODULE, "MarketPortfolio", "negative market weight")
        if self.returns.tickers != self.tickers:
            raise DataError(_MODULE, "MarketPortfolio", "return panel tickers do not match the market tickers")


@dataclass(frozen=True)
class EquilibriumPrior:
    pi: np.ndarray
    delta: float
    tau: float
    sigma: np.ndarray
    tickers: tuple[str, ...] = ()
    market_weights: np.ndarray | None = None
    risk_free: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pi", _readonly(self.pi))
        object.__setattr__(self, "sigma", _readonly(0.5 * (np.asarray(self.sigma) + np.asarray(self.sigma).T)))
        if self.market_weights is not None:
            object.__setattr__(self, "market_weights", _readonly(self.market_weights))
        if self.tau <= 0.0:
            raise DataError(_MODULE, "EquilibriumPrior", f"tau must be positive, got {self.tau}")
        if self.delta <= 0.0:
            raise DataError(_MODULE, "EquilibriumPrior", f"delta must be positive, got {self.delta}")

    @property
    def n_assets(self) -> int:
        return self.pi.shape[0]


@dataclass(frozen=True)
class ViewSet:
    p: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "p", _readonly(np.atleast_2d(self.p) if np.size(self.p) else np.zeros((0, 0))))
        object.__setattr__(self, "q", _readonly(np.atleast_1d(self.q) if np.size(self.q) else np.zeros(0)))
        object.__setattr__(self, "omega", _readonly(np.atleast_2d(self.omega) if np.size(self.omega) else np.zeros((0, 0))))
        k = self.q.shape[0]
        if k:
            if self.p.shape[0] != k or self.omega.shape != (k, k):
                raise DataError(_MODULE, "ViewSet", f"inconsistent shapes: p {self.p.shape}, q {self.q.shape}, omega {self.omega.shape}")
            if np.any(np.all(np.abs(self.p) < 1e-15, axis=1)):
                raise DataError(_MODULE, "ViewSet", "a view row of the pick matrix is all zero")
            if np.any(np.diag(self.omega) <= 0.0):
                raise DataError(_MODULE, "ViewSet", "omega diagonal must be strictly positive")
            if np.max(np.abs(self.omega - np.diag(np.diag(self.omega)))) > 0.0:
                raise DataError(_MODULE, "ViewSet", "omega must be diagonal")

    @property
    def k(self) -> int:
        return self.q.shape[0]

    @classmethod
    def empty(cls, n_assets: int) -> "ViewSet":
        return cls(np.zeros((0, n_assets)), np.zeros(0), np.zeros((0, 0)), ())


@dataclass(frozen=True)
class BLPosterior:
    mu_bl: np.ndarray
    sigma_bl: np.ndarray
    prior: EquilibriumPrior
    views: ViewSet

    def __post_init__(self):
        object.__setattr__(self, "mu_bl", _readonly(self.mu_bl))
        sig = 0.5 * (np.asarray(self.sigma_bl) + np.asarray(self.sigma_bl).T)
        object.__setattr__(self, "sigma_bl", _readonly(sig))


def build_market_portfolio(
    asset_caps: Mapping[str, float],
    total_market_cap: float,
    asset_returns: ReturnPanel,
    residual_returns: ReturnPanel,
    residual_symbol: str = "REST",
) -> MarketPortfolio:
    """Cap-proportional weights for the named assets plus a residual bucket.

    The residual return series stands in for everything in the market that is
    not individually modeled; its weight is whatever cap share remains.
    """
    op = "build_market_portfolio"
    if total_market_cap <= 0.0:
        raise DataError(_MODULE, op, f"total market cap must be positive, got {total_market_cap}")
    missing = [t for t in asset_caps if t not in asset_returns.tickers]
    if missing:
        raise DataError(_MODULE, op, f"no return series for {missing[0]!r}")
    cap_sum = float(sum(asset_caps.values()))
    if cap_sum > total_market_cap * (1.0 + 1e-12):
        raise DataError(_MODULE, op, f"asset caps sum to {cap_sum:.6g}, exceeding the total {total_market_cap:.6g}")
    if residual_returns.n_assets != 1:
        raise DataError(_MODULE, op, f"residual panel must have exactly one column, got {residual_returns.n_assets}")
    if residual_returns.dates != asset_returns.dates:
        raise DataError(_MODULE, op, "residual return series is not date-aligned with the asset panel")

    ordered = [t for t in asset_returns.tickers if t in asset_caps]
    weights = np.array([asset_caps[t] / total_market_cap for t in ordered] + [1.0 - cap_sum / total_market_cap])
    panel = ReturnPanel(
        tuple(ordered) + (residual_symbol,),
        asset_returns.dates,
        np.column_stack([asset_returns.select(ordered).returns, residual_returns.returns[:, 0]]),
    )
    return MarketPortfolio(panel.tickers, weights, panel, residual_symbol)


def _market_moments(market: MarketPortfolio, trading_days: int) -> MomentEstimates:
    return estimate_moments(market.returns, trading_days)


def _market_variance(moments: MomentEstimates, w: np.ndarray, op: str) -> float:
    var = float(w @ moments.sigma @ w)
    # a constant return series leaves float noise, not an exact zero, in the
    # sample covariance; measure "zero" against the return magnitudes instead
    floor = (1e-12 * max(1e-15, float(np.max(np.abs(moments.mu))))) ** 2
    if var <= floor:
        raise DataError(_MODULE, op, "market portfolio has zero variance")
    return var


def market_sharpe(market: MarketPortfolio, risk_free: float = 0.0, trading_days: int = 252) -> float:
    """Annualized excess return of the cap-weighted market over its volatility."""
    moments = _market_moments(market, trading_days)
    w = market.weights
    var = _market_variance(moments, w, "market_sharpe")
    return (float(moments.mu @ w) - risk_free) / math.sqrt(var)


def implied_risk_aversion(market: MarketPortfolio, risk_free: float = 0.0, trading_days: int = 252) -> float:
    """delta = annualized market excess return / annualized market variance."""
    moments = _market_moments(market, trading_days)
    w = market.weights
    var = _market_variance(moments, w, "implied_risk_aversion")
    delta = (float(moments.mu @ w) - risk_free) / var
    if delta <= 0.0:
        warnings.warn(
            f"implied risk aversion {delta:.4f} is not positive; "
            "a non-positive delta inverts the optimization",
            stacklevel=2,
        )
    return delta


def equilibrium_returns(delta: float, sigma: np.ndarray, market_weights: np.ndarray) -> np.ndarray:
    """Reverse optimization: pi = delta * Sigma * w_mkt."""
    sigma = np.asarray(sigma, dtype=np.float64)
    w = np.asarray(market_weights, dtype=np.float64)
    if sigma.shape != (w.shape[0], w.shape[0]):
        raise DataError(_MODULE, "equilibrium_returns", f"sigma shape {sigma.shape} vs {w.shape[0]} weights")
    return delta * (sigma @ w)


def equilibrium_prior(
    market: MarketPortfolio,
    risk_free: float = 0.0,
    tau: float | None = None,
    trading_days: int = 252,
) -> EquilibriumPrior:
    """Assemble the full prior from a market portfolio; tau defaults to 1/T."""
    moments = _market_moments(market, trading_days)
    delta = implied_risk_aversion(market, risk_free, trading_days)
    if delta <= 0.0:
        raise InfeasibleError(_MODULE, "equilibrium_prior", f"non-positive implied risk aversion {delta:.4f}")
    if tau is None:
        tau = 1.0 / market.returns.n_obs
    pi = equilibrium_returns(delta, moments.sigma, market.weights)
    return EquilibriumPrior(
        pi=pi, delta=delta, tau=tau, sigma=moments.sigma,
        tickers=market.tickers, market_weights=market.weights, risk_free=risk_free,
    )


_REL_VIEW = re.compile(r"^rel\s+(\S+)\s*>\s*(\S+)\s+by\s+(-?[\d.eE+-]+)$")
_ABS_VIEW = re.compile(r"^abs\s+(\S+)\s*=\s*(-?[\d.eE+-]+)$")


def parse_view_text(line: str) -> dict:
    """One view per line: `rel A > B by 0.02` or `abs X = 0.10`."""
    text = line.strip()
    m = _REL_VIEW.match(text)
    if m:
        return {"kind": "relative", "asset_a": m.group(1), "asset_b": m.group(2), "magnitude": float(m.group(3))}
    m = _ABS_VIEW.match(text)
    if m:
        return {"kind": "absolute", "asset": m.group(1), "magnitude": float(m.group(2))}
    raise DataError(_MODULE, "parse_view_text", f"unparseable view {line!r}; expected 'rel A > B by x' or 'abs A = x'")


def build_views(
    view_specs: Sequence[dict | str],
    prior: EquilibriumPrior,
    omega_scale: float = 1.0,
) -> ViewSet:
    """Pick matrix, view returns, and uncertainty from structured or text views.

    Omega is diagonal with entries omega_scale * (P tau Sigma P')_kk, so view
    uncertainty scales with the prior uncertainty of the assets each view
    touches.  A per-view `omega_scale` in a structured spec multiplies the
    global scale for that row.
    """
    op = "build_views"
    if omega_scale <= 0.0:
        raise DataError(_MODULE, op, f"omega_scale must be positive, got {omega_scale}")
    n = prior.n_assets
    tickers = prior.tickers
    if len(tickers) != n:
        raise DataError(_MODULE, op, "prior carries no tickers; build it from a market portfolio")
    index = {t: i for i, t in enumerate(tickers)}

    rows, qs, labels, scales = [], [], [], []
    seen = set()
    for spec in view_specs:
        if isinstance(spec, str):
            spec = parse_view_text(spec)
        kind = spec.get("kind")
        row = np.zeros(n)
        if kind == "relative":
            a, b = spec["asset_a"], spec["asset_b"]
            if a not in index:
                raise DataError(_MODULE, op, f"unknown asset {a!r} in view")
            if b not in index:
                raise DataError(_MODULE, op, f"unknown asset {b!r} in view")
            if a == b:
                raise DataError(_MODULE, op, f"relative view needs two distinct assets, got {a!r} twice")
            row[index[a]] = 1.0
            row[index[b]] = -1.0
            q = float(spec["magnitude"])
            label = f"rel {a} > {b} by {q}"
        elif kind == "absolute":
            a = spec["asset"]
            if a not in index:
                raise DataError(_MODULE, op, f"unknown asset {a!r} in view")
            row[index[a]] = 1.0
            q = float(spec["magnitude"])
            label = f"abs {a} = {q}"
        else:
            raise DataError(_MODULE, op, f"view kind must be 'relative' or 'absolute', got {kind!r}")
        key = (tuple(row), q)
        if key in seen:
            raise DataError(_MODULE, op, f"duplicate view: {label}")
        seen.add(key)
        rows.append(row)
        qs.append(q)
        labels.append(label)
        scales.append(float(spec.get("omega_scale", 1.0)) if isinstance(spec, dict) else 1.0)

    if not rows:
        return ViewSet.empty(n)
    p = np.vstack(rows)
    tau_sigma = prior.tau * prior.sigma
    base = np.diag(p @ tau_sigma @ p.T)
    omega_diag = omega_scale * np.asarray(scales) * base
    if np.any(omega_diag <= 0.0):
        k = int(np.argmin(omega_diag))
        raise DataError(_MODULE, op, f"view {labels[k]!r} has non-positive uncertainty; prior variance degenerate along it")
    return ViewSet(p, np.asarray(qs), np.diag(omega_diag), tuple(labels))


def posterior(prior: EquilibriumPrior, views: ViewSet) -> BLPosterior:
    """Posterior moments from the master equation.

    mu_BL    = [(tau Sigma)^-1 + P' Omega^-1 P]^-1 [(tau Sigma)^-1 pi + P' Omega^-1 Q]
    Sigma_BL = Sigma + [(tau Sigma)^-1 + P' Omega^-1 P]^-1

    With tau Sigma = L L', the bracket inverse is L (I + L'P'Omega^-1 P L)^-1 L',
    so everything reduces to one Cholesky of tau Sigma and one of the inner
    symmetric system.
    """
    op = "posterior"
    n = prior.n_assets
    if views.k == 0:
        return BLPosterior(prior.pi.copy(), (1.0 + prior.tau) * prior.sigma, prior, views)
    if views.p.shape[1] != n:
        raise DataError(_MODULE, op, f"pick matrix has {views.p.shape[1]} columns, prior has {n} assets")

    tau_sigma = prior.tau * prior.sigma
    try:
        c, low = cho_factor(tau_sigma, lower=True)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(tau_sigma)[0])
        raise SolverError(_MODULE, op, f"tau*Sigma is numerically singular (smallest eigenvalue {smallest:.3e})") from None
    L = np.tril(c)

    omega_diag = np.diag(views.omega)
    # G = Omega^{-1/2} P L, inner system S = I + G'G
    G = (views.p / np.sqrt(omega_diag)[:, None]) @ L
    S = np.eye(n) + G.T @ G
    s_factor = cho_factor(0.5 * (S + S.T), lower=True)

    # right-hand side: (tau Sigma)^-1 pi + P' Omega^-1 Q  =  L^-T (L^-1 pi) + ...
    # folded so mu_BL = L S^-1 (L^-1 pi + L' P' Omega^-1 Q)
    inner_rhs = solve_triangular(L, prior.pi, lower=True) + L.T @ (views.p.T @ (views.q / omega_diag))
    mu_bl = L @ cho_solve(s_factor, inner_rhs)

    bracket_inv = L @ cho_solve(s_factor, L.T)
    sigma_bl = prior.sigma + bracket_inv
    return BLPosterior(mu_bl, sigma_bl, prior, views)


def bl_optimal_weights(
    post: BLPosterior,
    bounds: Bounds | None = None,
    use_posterior_sigma: bool = False,
    trading_days: int = 252,
) -> PortfolioWeights:
    """Mean-variance optimal weights at the posterior returns.

    Unbounded: w proportional to (delta Sigma)^-1 mu_BL, normalized to sum 1.
    With bounds: the QP max mu_BL'w - (delta/2) w'Sigma w under budget and box.
    Sigma is the prior covariance unless use_posterior_sigma is set.
    """
    op = "bl_optimal_weights"
    prior = post.prior
    sigma = post.sigma_bl if use_posterior_sigma else prior.sigma
    tickers = prior.tickers if len(prior.tickers) == prior.n_assets else tuple(f"asset{i}" for i in range(prior.n_assets))

    if bounds is None:
        try:
            c, low = cho_factor(prior.delta * sigma, lower=True)
        except np.linalg.LinAlgError:
            raise SolverError(_MODULE, op, "delta*Sigma is numerically singular") from None
        raw = cho_solve((c, low), post.mu_bl)
        total = float(raw.sum())
        if abs(total) < 1e-300:
            raise SolverError(_MODULE, op, "unconstrained weights sum to zero; cannot normalize")
        w = raw / total
        if np.all(w >= -1e-12) and np.all(w <= 1.0 + 1e-12):
            w = np.clip(w, 0.0, 1.0)
            return PortfolioWeights(tickers, w / w.sum(), Bounds.box(w.shape[0]), float(w @ sigma @ w), {"method": "analytic"})
        # the analytic solution shorts something; the weights container is
        # long-only, so solve the equivalent long-only QP instead
        moments = MomentEstimates(mu=post.mu_bl, sigma=sigma, tickers=tickers)
        return solve_utility(moments, Bounds.box(w.shape[0]), prior.delta)

    moments = MomentEstimates(mu=post.mu_bl, sigma=sigma, tickers=tickers)
    return solve_utility(moments, bounds, prior.delta)
