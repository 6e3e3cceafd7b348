"""HTTP service exposing the toolkit over a small JSON API.

The app loads one immutable dataset snapshot at startup (prices, factors,
market caps from the resolved config) and serves every request against it, so
concurrent requests never contend and any request sequence behaves like each
request issued alone.  Every response embeds the config hash and the seed it
used, which is enough to replay the computation through the CLI.

Error mapping: malformed or out-of-domain requests give 400 with a
machine-readable reason, mathematically infeasible optimization inputs give
422, and numerical solver failures give 500.  Unexpected exceptions also give
500 with a fixed message so internals never leak.
"""

from __future__ import annotations

import asyncio
import math
import os
from dataclasses import dataclass
from datetime import date

import numpy as np
from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .backtest import run_backtest
from .blacklitterman import (
    MarketPortfolio,
    bl_optimal_weights,
    build_market_portfolio,
    build_views,
    equilibrium_prior,
    posterior,
)
from .config import RunConfig, config_hash
from .errors import DataError, FrontierLabError, InfeasibleError, SolverError
from .factors import COEFFICIENT_NAMES, FactorPanel, load_factors, ols_regress, portfolio_excess, robust_regress
from .fixtures import bundled_market_caps
from .market_data import (
    MomentEstimates,
    ReturnPanel,
    align,
    estimate_moments,
    load_prices,
    log_returns,
)
from .montecarlo import SimulationConfig, simulate_search
from .optimizer import (
    Bounds,
    PortfolioWeights,
    kkt_check,
    solve_gmv,
    solve_max_sharpe,
    solve_min_variance_at_return,
    trace_frontier,
)

_MODULE = "app-interface"


@dataclass(frozen=True)
class DatasetSnapshot:
    """Everything a request handler may read.  Loaded once, never mutated."""

    config: RunConfig
    digest: str
    panel: ReturnPanel
    moments: MomentEstimates
    factors: FactorPanel
    market: MarketPortfolio


def build_snapshot(config: RunConfig | None = None) -> DatasetSnapshot:
    cfg = (config or RunConfig()).with_fixture_defaults()
    panel = log_returns(align(load_prices(cfg.prices)))
    moments = estimate_moments(panel, cfg.trading_days)
    factors = load_factors(cfg.factors)
    caps, total = _load_caps(cfg.market_caps)
    residual = log_returns(align(load_prices(cfg.residual_prices)))
    market = build_market_portfolio(caps, total, panel, residual)
    return DatasetSnapshot(
        config=cfg, digest=config_hash(cfg), panel=panel, moments=moments,
        factors=factors, market=market,
    )


def _load_caps(path: str) -> tuple[dict[str, float], float]:
    from .fixtures import fixture_path

    if path == str(fixture_path("market_caps.csv")):
        return bundled_market_caps()
    caps: dict[str, float] = {}
    total = None
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, value = line.split(",")
            if name == "TOTAL":
                total = float(value)
            else:
                caps[name] = float(value)
    if total is None:
        raise DataError(_MODULE, "build_snapshot", f"caps file {path!r} has no TOTAL row")
    return caps, total


# ---------------------------------------------------------------------------
# request bodies


class BoundsBody(BaseModel):
    lower: float | list[float] = 0.0
    upper: float | list[float] = 1.0


class WindowBody(BaseModel):
    start: str | None = None
    end: str | None = None


class OptimizeBody(BaseModel):
    bounds: BoundsBody | None = None
    objective: str = "min_variance"
    target_return: float | None = None
    risk_free: float = 0.0


class FrontierBody(BaseModel):
    bounds: BoundsBody | None = None
    points: int = 50
    include_unconstrained: bool = False


class SimulateBody(BaseModel):
    samples: int = 10_000
    sampler: str = "dirichlet"
    seed: int = 0
    bounds: BoundsBody | None = None
    objective: str = "min_variance"
    risk_free: float = 0.0


class RegressBody(BaseModel):
    window: WindowBody | None = None
    weights: list[float] | None = None


class BlackLittermanBody(BaseModel):
    views: list[str | dict] = []
    tau: float | None = None
    omega_scale: float = 1.0
    bounds: BoundsBody | None = None


class BacktestBody(BaseModel):
    weights: dict[str, float] | list[float]
    window: WindowBody | None = None
    risk_free: float = 0.0
    buy_and_hold: bool = False


# ---------------------------------------------------------------------------
# small converters


def _floats(a) -> list[float]:
    return [float(x) for x in np.asarray(a, dtype=np.float64).ravel()]


def _matrix(a) -> list[list[float]]:
    return [_floats(row) for row in np.asarray(a, dtype=np.float64)]


def _plain(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return _floats(value)
    return value


def _weights_payload(w: PortfolioWeights) -> dict:
    return {
        "tickers": list(w.tickers),
        "w": _floats(w.w),
        "objective_value": float(w.objective_value),
        "meta": {k: _plain(v) for k, v in w.meta.items()},
    }


def _parse_day(text: str, field: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise DataError(_MODULE, "service", f"unparseable {field} date {text!r}") from None


def _make_bounds(body: BoundsBody | None, tickers: tuple[str, ...]) -> Bounds:
    n = len(tickers)
    if body is None:
        return Bounds.box(n)
    lo = np.full(n, float(body.lower)) if isinstance(body.lower, (int, float)) else np.asarray(body.lower, dtype=np.float64)
    up = np.full(n, float(body.upper)) if isinstance(body.upper, (int, float)) else np.asarray(body.upper, dtype=np.float64)
    if lo.shape != (n,) or up.shape != (n,):
        raise DataError(_MODULE, "service", f"bounds must have one entry per asset ({n}), got {lo.shape[0]} and {up.shape[0]}")
    for i in range(n):
        if lo[i] > up[i]:
            raise DataError(_MODULE, "service", f"lower bound exceeds upper bound for asset {tickers[i]!r}")
    if lo.min() < 0.0 or up.max() > 1.0:
        raise DataError(_MODULE, "service", "weight bounds must lie within [0, 1]")
    return Bounds(lo, up)


def _window_panel(panel: ReturnPanel, window: WindowBody | None, default_after: date | None = None) -> ReturnPanel:
    start = _parse_day(window.start, "start") if window and window.start else None
    end = _parse_day(window.end, "end") if window and window.end else None
    if start is None and end is None and default_after is not None:
        keep = [i for i, d in enumerate(panel.dates) if d > default_after]
    else:
        keep = [
            i for i, d in enumerate(panel.dates)
            if (start is None or d >= start) and (end is None or d <= end)
        ]
    if len(keep) < 2:
        raise DataError(_MODULE, "service", "requested window leaves fewer than 2 observations")
    dates = tuple(panel.dates[i] for i in keep)
    return ReturnPanel(panel.tickers, dates, panel.returns[keep, :])


def _weight_vector(raw: dict[str, float] | list[float], tickers: tuple[str, ...]) -> np.ndarray:
    if isinstance(raw, dict):
        missing = [t for t in tickers if t not in raw]
        if missing:
            raise DataError(_MODULE, "service", f"weights missing entry for {missing[0]!r}")
        w = np.array([float(raw[t]) for t in tickers])
    else:
        if len(raw) != len(tickers):
            raise DataError(_MODULE, "service", f"expected {len(tickers)} weights, got {len(raw)}")
        w = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise DataError(_MODULE, "service", "weights must be finite")
    if w.min() < -1e-9 or w.max() > 1.0 + 1e-9:
        raise DataError(_MODULE, "service", "weights must lie within [0, 1]")
    if abs(w.sum() - 1.0) > 1e-6:
        raise DataError(_MODULE, "service", f"weights sum to {float(w.sum())!r}, expected 1")
    return np.clip(w / w.sum(), 0.0, 1.0)


# ---------------------------------------------------------------------------
# app factory


def create_app(config: RunConfig | None = None) -> FastAPI:
    snap = build_snapshot(config)
    cfg = snap.config
    app = FastAPI(title="frontierlab", version=__version__, docs_url=None, redoc_url=None)
    sim_gate = asyncio.Semaphore(max(cfg.simulation_workers, 1))

    def _stamp(payload: dict, seed: int | None = None) -> dict:
        payload["config_hash"] = snap.digest
        payload["seed"] = cfg.seed if seed is None else seed
        return payload

    def _error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})

    @app.exception_handler(FrontierLabError)
    async def _domain_error(_req: Request, exc: FrontierLabError):
        if isinstance(exc, DataError):
            return _error(400, "data", str(exc))
        if isinstance(exc, InfeasibleError):
            return _error(422, "infeasible", str(exc))
        if isinstance(exc, SolverError):
            return _error(500, "solver", str(exc))
        return _error(400, "usage", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()) if p != "body")
        return _error(400, "validation", f"{where or 'body'}: {first.get('msg', 'invalid request')}")

    @app.exception_handler(Exception)
    async def _unexpected(_req: Request, _exc: Exception):
        return _error(500, "internal", "internal error")

    @app.get("/health")
    def health():
        return _stamp({
            "status": "ok",
            "version": __version__,
            "n_assets": snap.panel.n_assets,
            "n_obs": snap.panel.n_obs,
        })

    @app.get("/assets")
    def assets():
        # market weights are reported per listed ticker; the residual bucket
        # (everything in the market not modeled individually) rides separately
        return _stamp({
            "tickers": list(snap.panel.tickers),
            "n_obs": snap.panel.n_obs,
            "start": snap.panel.dates[0].isoformat(),
            "end": snap.panel.dates[-1].isoformat(),
            "mu": _floats(snap.moments.mu),
            "volatility": _floats(np.sqrt(np.diag(snap.moments.sigma))),
            "market_weights": _floats(snap.market.weights[:-1]),
            "residual_symbol": snap.market.residual_symbol,
            "residual_weight": float(snap.market.weights[-1]),
        })

    @app.post("/optimize")
    def optimize(body: OptimizeBody):
        bounds = _make_bounds(body.bounds, snap.panel.tickers)
        if body.objective == "min_variance":
            if body.target_return is None:
                w = solve_gmv(snap.moments, bounds)
            else:
                w = solve_min_variance_at_return(snap.moments, bounds, body.target_return)
        elif body.objective == "max_sharpe":
            w = solve_max_sharpe(snap.moments, bounds, risk_free=body.risk_free)
        else:
            raise DataError(_MODULE, "optimize", f"unknown objective {body.objective!r}")
        # The max-Sharpe point is the min-variance portfolio at its own return,
        # so its KKT system includes the return constraint.
        target = body.target_return
        if body.objective == "max_sharpe":
            target = float(snap.moments.mu @ w.w)
        report = kkt_check(w, snap.moments, bounds, target_return=target)
        payload = _weights_payload(w)
        payload["kkt_max_residual"] = float(report.max_residual())
        return _stamp(payload)

    @app.post("/frontier")
    def frontier(body: FrontierBody):
        bounds = _make_bounds(body.bounds, snap.panel.tickers)
        points = trace_frontier(snap.moments, bounds, body.points)
        gmv = solve_gmv(snap.moments, bounds)
        payload = {
            "points": [
                {"target_return": float(p.target_return), "volatility": float(p.volatility), "w": _floats(p.weights.w)}
                for p in points
            ],
            "gmv": {
                "target_return": float(snap.moments.mu @ gmv.w),
                "volatility": float(math.sqrt(max(gmv.objective_value, 0.0))),
                "w": _floats(gmv.w),
            },
        }
        if body.include_unconstrained:
            open_box = Bounds.box(snap.panel.n_assets)
            payload["unconstrained"] = [
                {
                    "target_return": float(p.target_return),
                    "volatility": float(math.sqrt(max(
                        solve_min_variance_at_return(snap.moments, open_box, p.target_return).objective_value, 0.0))),
                }
                for p in points
            ]
        return _stamp(payload)

    @app.post("/simulate")
    async def simulate(body: SimulateBody):
        bounds = _make_bounds(body.bounds, snap.panel.tickers) if body.bounds is not None else None
        sim_cfg = SimulationConfig(
            n_samples=body.samples, sampler=body.sampler, seed=body.seed,
            bounds=bounds, objective=body.objective, risk_free=body.risk_free,
        )
        async with sim_gate:
            result = await run_in_threadpool(simulate_search, snap.moments, sim_cfg)
        payload = {
            "best_weights": _weights_payload(result.best_weights),
            "best_objective": float(result.best_objective),
            "accepted": result.accepted,
            "rejected": result.rejected,
            "trace": [[i, float(v)] for i, v in result.trace],
            "meta": {k: _plain(v) for k, v in result.meta.items()},
        }
        return _stamp(payload, seed=body.seed)

    @app.post("/regress")
    def regress(body: RegressBody):
        panel = _window_panel(snap.panel, body.window)
        if body.weights is None:
            w = np.full(panel.n_assets, 1.0 / panel.n_assets)
        else:
            w = _weight_vector(body.weights, panel.tickers)
        y, matched = portfolio_excess(panel, w, snap.factors)
        ols = ols_regress(y, matched)
        robust = robust_regress(y, matched)

        def _coef_block(rep) -> dict:
            return {
                "coefficients": dict(zip(COEFFICIENT_NAMES, _floats(rep.coefficients))),
                "std_errors": dict(zip(COEFFICIENT_NAMES, _floats(rep.std_errors))),
                "p_values": dict(zip(COEFFICIENT_NAMES, _floats(rep.p_values))),
            }

        ols_payload = _coef_block(ols)
        ols_payload.update({
            "t_stats": dict(zip(COEFFICIENT_NAMES, _floats(ols.t_stats))),
            "r_squared": float(ols.r_squared),
            "adj_r_squared": float(ols.adj_r_squared),
            "f_statistic": float(ols.f_statistic),
            "f_p_value": float(ols.f_p_value),
            "durbin_watson": float(ols.durbin_watson),
            "jarque_bera": float(ols.jarque_bera),
            "jb_p_value": float(ols.jb_p_value),
            "kurtosis": float(ols.kurtosis),
            "degenerate_response": bool(ols.degenerate_response),
        })
        robust_payload = _coef_block(robust)
        robust_payload.update({
            "iterations": robust.iterations,
            "converged": bool(robust.converged),
            "scale": float(robust.scale),
            "tuning_constant": float(robust.tuning_constant),
            "asymptotic_inference": bool(robust.asymptotic_inference),
        })
        return _stamp({"n_obs": ols.n_obs, "ols": ols_payload, "robust": robust_payload})

    @app.post("/blacklitterman")
    def blacklitterman(body: BlackLittermanBody):
        if body.tau is not None and body.tau <= 0:
            raise DataError(_MODULE, "blacklitterman", f"tau must be positive, got {body.tau}")
        if body.omega_scale <= 0:
            raise DataError(_MODULE, "blacklitterman", f"omega_scale must be positive, got {body.omega_scale}")
        tau = body.tau if body.tau is not None else (cfg.tau if cfg.tau > 0 else None)
        prior = equilibrium_prior(snap.market, risk_free=cfg.risk_free, tau=tau, trading_days=cfg.trading_days)
        views = build_views(list(body.views), prior, body.omega_scale)
        post = posterior(prior, views)
        bounds = _make_bounds(body.bounds, prior.tickers) if body.bounds is not None else None
        w = bl_optimal_weights(post, bounds=bounds)
        return _stamp({
            "tickers": list(prior.tickers),
            "prior": {
                "pi": _floats(prior.pi),
                "delta": float(prior.delta),
                "tau": float(prior.tau),
                "risk_free": float(prior.risk_free),
                "market_weights": _floats(prior.market_weights),
            },
            "posterior": {
                "mu_bl": _floats(post.mu_bl),
                "sigma_bl": _matrix(post.sigma_bl),
            },
            "views": {"k": views.k, "labels": list(views.labels), "q": _floats(views.q)},
            "omega_scale": float(body.omega_scale),
            "weights": _weights_payload(w),
        })

    @app.post("/backtest")
    def backtest(body: BacktestBody):
        w = _weight_vector(body.weights, snap.panel.tickers)
        test = _window_panel(snap.panel, body.window, default_after=cfg.boundary)
        weights = PortfolioWeights(snap.panel.tickers, w, Bounds.box(snap.panel.n_assets), 0.0)
        report = run_backtest(weights, test, risk_free=body.risk_free,
                              buy_and_hold=body.buy_and_hold, trading_days=cfg.trading_days)
        return _stamp({
            "cumulative_return": float(report.cumulative_return),
            "sharpe": float(report.sharpe),
            "max_drawdown": float(report.max_drawdown),
            "annualized_return": float(report.annualized_return),
            "annualized_volatility": float(report.annualized_volatility),
            "daily_returns": _floats(report.daily_returns),
            "wealth_curve": _floats(report.wealth_curve),
            "window": {
                "start": test.dates[0].isoformat(),
                "end": test.dates[-1].isoformat(),
                "days": test.n_obs,
            },
        })

    if cfg.ui_dir and os.path.isdir(cfg.ui_dir):
        app.mount("/", StaticFiles(directory=cfg.ui_dir, html=True), name="ui")

    return app


def run_service(config: RunConfig | None = None) -> None:
    import uvicorn

    cfg = (config or RunConfig()).with_fixture_defaults()
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="warning")
