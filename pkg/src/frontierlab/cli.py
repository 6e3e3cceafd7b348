"""Command-line interface.

Every subcommand writes machine-readable CSV (full float precision via repr)
plus a human summary to the output directory, and prints the summary.  Output
is a pure function of the resolved configuration: no timestamps, no machine
identifiers, so repeated runs are byte-identical.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver/infeasibility.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from datetime import date

import numpy as np

from . import __version__
from .backtest import run_backtest
from .blacklitterman import bl_optimal_weights, build_market_portfolio, build_views, equilibrium_prior, posterior
from .config import ENV_PREFIX, ExperimentRecipe, RunConfig, config_hash, load_config
from .errors import DataError, FrontierLabError
from .factors import COEFFICIENT_NAMES, factor_correlations, load_factors, ols_regress, portfolio_excess, robust_regress
from .fixtures import bundled_market_caps
from .market_data import MomentEstimates, align, estimate_moments, load_prices, log_returns, split_panel
from .montecarlo import SimulationConfig, simulate_search
from .optimizer import Bounds, PortfolioWeights, kkt_check, solve_gmv, solve_max_sharpe, trace_frontier

_MODULE = "app-interface"


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("--outdir", "-o", help="output directory (default frontierlab_out)")
    p.add_argument("--prices", help="price CSV path or URL")
    p.add_argument("--trading-days", type=int, dest="trading_days")
    p.add_argument("--risk-free", type=float, dest="risk_free")


def _add_bounds(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-weight", type=float, dest="min_weight")
    p.add_argument("--max-weight", type=float, dest="max_weight")


def build_parser() -> _Parser:
    parser = _Parser(prog="frontierlab", description="portfolio construction toolkit")
    parser.add_argument("--version", action="version", version=f"frontierlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("moments", help="annualized mean and covariance from prices")
    _add_common(p)

    p = sub.add_parser("gmv", help="global minimum-variance portfolio")
    _add_common(p)
    _add_bounds(p)

    p = sub.add_parser("frontier", help="efficient frontier")
    _add_common(p)
    _add_bounds(p)
    p.add_argument("--points", type=int)
    p.add_argument("--compare-unconstrained", action="store_true", dest="compare_unconstrained")

    p = sub.add_parser("simulate", help="random portfolio search")
    _add_common(p)
    _add_bounds(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--sampler", choices=["dirichlet", "uniform_normalized", "halton"])
    p.add_argument("--seed", type=int)
    p.add_argument("--objective", choices=["min_variance", "max_sharpe"])

    p = sub.add_parser("regress", help="five-factor attribution of a portfolio")
    _add_common(p)
    p.add_argument("--factors", help="factor CSV path or URL")
    p.add_argument("--weights", dest="weights_file", help="weights CSV (ticker,weight); default equal weight")

    p = sub.add_parser("bl", help="Black-Litterman posterior and weights")
    _add_common(p)
    _add_bounds(p)
    p.add_argument("--caps", dest="market_caps", help="market-cap CSV with a TOTAL row")
    p.add_argument("--residual-prices", dest="residual_prices", help="residual asset price CSV")
    p.add_argument("--view", action="append", dest="view_list", metavar="VIEW",
                   help="'rel A > B by 0.02' or 'abs A = 0.10'; repeatable")
    p.add_argument("--tau", type=float)
    p.add_argument("--omega-scale", type=float, dest="omega_scale")

    p = sub.add_parser("backtest", help="out-of-sample evaluation of fixed weights")
    _add_common(p)
    p.add_argument("--weights", dest="weights_file", help="weights CSV (ticker,weight)")
    p.add_argument("--boundary", help="train/test boundary date (ISO)")

    p = sub.add_parser("pipeline", help="full chain: moments, gmv, frontier, regress, bl, backtest")
    _add_common(p)
    _add_bounds(p)
    p.add_argument("--factors")
    p.add_argument("--caps", dest="market_caps")
    p.add_argument("--residual-prices", dest="residual_prices")
    p.add_argument("--boundary")
    p.add_argument("--view", action="append", dest="view_list")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_common(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for key in ("outdir", "prices", "factors", "market_caps", "residual_prices", "trading_days",
                "risk_free", "min_weight", "max_weight", "points", "samples", "sampler", "seed",
                "objective", "tau", "omega_scale", "host", "port"):
        if hasattr(args, key) and getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "boundary", None):
        try:
            overrides["boundary"] = date.fromisoformat(args.boundary)
        except ValueError:
            raise DataError(_MODULE, "cli", f"unparseable boundary date {args.boundary!r}") from None
    if getattr(args, "view_list", None):
        overrides["views"] = tuple(args.view_list)
    cfg = load_config(getattr(args, "config", None), overrides=overrides)
    return cfg.with_fixture_defaults()


def _write(outdir: str, name: str, text: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _weights_csv(w: PortfolioWeights) -> str:
    lines = ["ticker,weight"]
    for t, x in zip(w.tickers, w.w):
        lines.append(f"{t},{_r(x)}")
    return "\n".join(lines) + "\n"


def _load_weight_file(path: str, tickers: tuple[str, ...]) -> np.ndarray:
    table = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if "ticker" not in header:
            raise DataError(_MODULE, "cli", f"weights file {path!r} missing its ticker,weight header")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, value = line.split(",")
            table[name] = float(value)
    missing = [t for t in tickers if t not in table]
    if missing:
        raise DataError(_MODULE, "cli", f"weights file {path!r} has no entry for {missing[0]!r}")
    return np.array([table[t] for t in tickers])


def _moments_from_config(cfg: RunConfig) -> tuple[MomentEstimates, "object"]:
    panel = log_returns(align(load_prices(cfg.prices)))
    return estimate_moments(panel, cfg.trading_days), panel


def _bounds_from_config(cfg: RunConfig, n: int) -> Bounds:
    return Bounds(np.full(n, cfg.min_weight), np.full(n, cfg.max_weight))


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _r(x) -> str:
    """Full-precision machine form; plain float repr, never numpy's."""
    return repr(float(x))


def _header(cfg: RunConfig) -> str:
    return f"config_hash={config_hash(cfg)}\nseed={cfg.seed}\n"


def cmd_moments(cfg: RunConfig) -> str:
    moments, panel = _moments_from_config(cfg)
    lines = ["ticker,mu," + ",".join(f"sigma_{t}" for t in moments.tickers)]
    for i, t in enumerate(moments.tickers):
        row = ",".join(_r(v) for v in moments.sigma[i])
        lines.append(f"{t},{_r(moments.mu[i])},{row}")
    _write(cfg.outdir, "moments.csv", "\n".join(lines) + "\n")
    summary = [_header(cfg).rstrip()]
    summary.append(f"panel: {panel.n_obs} daily observations, {panel.n_assets} assets")
    for i, t in enumerate(moments.tickers):
        summary.append(f"{t}: mu={_fmt(moments.mu[i])} vol={_fmt(math.sqrt(moments.sigma[i, i]))}")
    return "\n".join(summary)


def cmd_gmv(cfg: RunConfig) -> str:
    moments, _ = _moments_from_config(cfg)
    bounds = _bounds_from_config(cfg, moments.n_assets)
    w = solve_gmv(moments, bounds)
    report = kkt_check(w, moments, bounds)
    _write(cfg.outdir, "gmv_weights.csv", _weights_csv(w))
    summary = [_header(cfg).rstrip(), "global minimum-variance portfolio"]
    for t, x in zip(w.tickers, w.w):
        summary.append(f"  {t}: {_fmt(x)}")
    summary.append(f"variance={_fmt(w.objective_value)} vol={_fmt(math.sqrt(w.objective_value))}")
    summary.append(f"kkt residuals: stationarity={report.stationarity_residual:.3e} "
                   f"feasibility={report.primal_feasibility_residual:.3e} "
                   f"complementarity={report.complementarity_residual:.3e}")
    return "\n".join(summary)


def cmd_frontier(cfg: RunConfig, compare_unconstrained: bool = False) -> str:
    moments, _ = _moments_from_config(cfg)
    bounds = _bounds_from_config(cfg, moments.n_assets)
    points = trace_frontier(moments, bounds, cfg.points)
    header = "target_return,volatility"
    other = None
    if compare_unconstrained:
        header += ",volatility_unconstrained"
        from .optimizer import solve_min_variance_at_return

        unconstrained = Bounds.box(moments.n_assets)
        other = [
            math.sqrt(max(solve_min_variance_at_return(moments, unconstrained, p.target_return).objective_value, 0.0))
            for p in points
        ]
    lines = [header]
    for i, p in enumerate(points):
        row = f"{_r(p.target_return)},{_r(p.volatility)}"
        if other is not None:
            row += f",{_r(other[i])}"
        lines.append(row)
    _write(cfg.outdir, "frontier.csv", "\n".join(lines) + "\n")
    summary = [_header(cfg).rstrip(), f"frontier: {len(points)} points, "
               f"returns {_fmt(points[0].target_return)}..{_fmt(points[-1].target_return)}, "
               f"min vol {_fmt(min(p.volatility for p in points))}"]
    if other is not None:
        tighter = sum(1 for i, p in enumerate(points) if p.volatility > other[i] + 1e-12)
        summary.append(f"constrained frontier is strictly wider at {tighter} of {len(points)} targets")
    return "\n".join(summary)


def cmd_simulate(cfg: RunConfig) -> str:
    moments, _ = _moments_from_config(cfg)
    bounds = _bounds_from_config(cfg, moments.n_assets)
    sim_cfg = SimulationConfig(
        n_samples=cfg.samples, sampler=cfg.sampler, seed=cfg.seed,
        bounds=bounds, objective=cfg.objective, risk_free=cfg.risk_free,
    )
    result = simulate_search(moments, sim_cfg)
    _write(cfg.outdir, "simulate_weights.csv", _weights_csv(result.best_weights))
    trace_lines = ["sample_index,best_objective"]
    trace_lines += [f"{i},{_r(v)}" for i, v in result.trace]
    _write(cfg.outdir, "simulate_trace.csv", "\n".join(trace_lines) + "\n")
    qp = solve_gmv(moments, bounds) if cfg.objective == "min_variance" else solve_max_sharpe(moments, bounds, cfg.risk_free)
    qp_obj = qp.objective_value if cfg.objective == "min_variance" else qp.meta["sharpe"]
    summary = [_header(cfg).rstrip(),
               f"sampler={cfg.sampler} objective={cfg.objective} samples={cfg.samples} seed={cfg.seed}",
               f"accepted={result.accepted} rejected={result.rejected}",
               f"best objective={_fmt(result.best_objective)} (QP reference {_fmt(qp_obj)})"]
    return "\n".join(summary)


def _regression_text(kind: str, rep) -> list[str]:
    lines = [f"{kind}.n_obs={rep.n_obs}"]
    for name, coef, se, p in zip(COEFFICIENT_NAMES, rep.coefficients, rep.std_errors, rep.p_values):
        lines.append(f"{kind}.{name}={_r(coef)}")
        lines.append(f"{kind}.{name}.se={_r(se)}")
        lines.append(f"{kind}.{name}.p={_r(p)}")
    return lines


def cmd_regress(cfg: RunConfig, weights_file: str | None = None) -> str:
    _, panel = _moments_from_config(cfg)
    factors = load_factors(cfg.factors)
    if weights_file:
        w = _load_weight_file(weights_file, panel.tickers)
    else:
        w = np.full(panel.n_assets, 1.0 / panel.n_assets)
    y, matched = portfolio_excess(panel, w, factors)
    ols = ols_regress(y, matched)
    robust = robust_regress(y, matched)
    corr = factor_correlations(matched)

    lines = _regression_text("ols", ols)
    lines += [
        f"ols.r_squared={_r(ols.r_squared)}",
        f"ols.adj_r_squared={_r(ols.adj_r_squared)}",
        f"ols.f_statistic={_r(ols.f_statistic)}",
        f"ols.f_p_value={_r(ols.f_p_value)}",
        f"ols.durbin_watson={_r(ols.durbin_watson)}",
        f"ols.jarque_bera={_r(ols.jarque_bera)}",
        f"ols.jb_p_value={_r(ols.jb_p_value)}",
        f"ols.kurtosis={_r(ols.kurtosis)}",
    ]
    lines += _regression_text("robust", robust)
    lines += [
        f"robust.iterations={robust.iterations}",
        f"robust.converged={robust.converged}",
        f"robust.scale={_r(robust.scale)}",
        f"robust.tuning_constant={_r(robust.tuning_constant)}",
    ]
    _write(cfg.outdir, "regression.txt", "\n".join(lines) + "\n")

    corr_lines = ["factor," + ",".join(("mkt_rf", "smb", "hml", "rmw", "cma"))]
    for i, name in enumerate(("mkt_rf", "smb", "hml", "rmw", "cma")):
        corr_lines.append(name + "," + ",".join(_r(v) for v in corr[i]))
    _write(cfg.outdir, "factor_correlations.csv", "\n".join(corr_lines) + "\n")

    summary = [_header(cfg).rstrip(),
               f"OLS: beta_mkt={_fmt(ols.coefficient('beta_mkt'))} r2={_fmt(ols.r_squared)} "
               f"dw={_fmt(ols.durbin_watson)} kurtosis={_fmt(ols.kurtosis)}",
               f"robust: beta_mkt={_fmt(robust.coefficient('beta_mkt'))} "
               f"iterations={robust.iterations} converged={robust.converged}"]
    return "\n".join(summary)


def _load_caps_file(path: str) -> tuple[dict[str, float], float]:
    caps: dict[str, float] = {}
    total = None
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if "ticker" not in header:
            raise DataError(_MODULE, "cli", f"caps file {path!r} missing its ticker,market_cap header")
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
        raise DataError(_MODULE, "cli", f"caps file {path!r} has no TOTAL row")
    return caps, total


def cmd_bl(cfg: RunConfig) -> str:
    _, panel = _moments_from_config(cfg)
    caps, total = _load_caps_file(cfg.market_caps) if cfg.market_caps else bundled_market_caps()
    residual = log_returns(align(load_prices(cfg.residual_prices)))
    market = build_market_portfolio(caps, total, panel, residual)
    prior = equilibrium_prior(market, risk_free=cfg.risk_free,
                              tau=cfg.tau if cfg.tau > 0 else None, trading_days=cfg.trading_days)
    views = build_views(list(cfg.views), prior, cfg.omega_scale)
    post = posterior(prior, views)
    n = prior.n_assets
    bounds = Bounds(np.full(n, cfg.min_weight), np.full(n, cfg.max_weight))
    w = bl_optimal_weights(post, bounds=bounds)

    lines = ["ticker,market_weight,pi,mu_bl,weight"]
    for i, t in enumerate(prior.tickers):
        lines.append(f"{t},{_r(market.weights[i])},{_r(prior.pi[i])},{_r(post.mu_bl[i])},{_r(w.w[i])}")
    _write(cfg.outdir, "bl_allocation.csv", "\n".join(lines) + "\n")

    summary = [_header(cfg).rstrip(),
               f"delta={_fmt(prior.delta)} tau={_fmt(prior.tau)} views={views.k}"]
    for i, t in enumerate(prior.tickers):
        summary.append(f"  {t}: pi={_fmt(prior.pi[i])} mu_bl={_fmt(post.mu_bl[i])} w={_fmt(w.w[i])}")
    return "\n".join(summary)


def cmd_backtest(cfg: RunConfig, weights_file: str | None = None) -> str:
    _, panel = _moments_from_config(cfg)
    split = split_panel(panel, cfg.boundary)
    if weights_file:
        wvec = _load_weight_file(weights_file, panel.tickers)
        bounds = Bounds.box(panel.n_assets)
        weights = PortfolioWeights(panel.tickers, wvec, bounds, 0.0)
    else:
        train_moments = estimate_moments(split.train, cfg.trading_days)
        weights = solve_gmv(train_moments, _bounds_from_config(cfg, panel.n_assets))
    report = run_backtest(weights, split.test, risk_free=cfg.risk_free, trading_days=cfg.trading_days)

    _write(cfg.outdir, "backtest.csv",
           "portfolio,cumulative_return,sharpe,max_drawdown\n" + report.csv_row("portfolio") + "\n")
    wealth_lines = ["day,wealth"] + [f"{i},{_r(v)}" for i, v in enumerate(report.wealth_curve)]
    _write(cfg.outdir, "wealth_curve.csv", "\n".join(wealth_lines) + "\n")
    summary = [_header(cfg).rstrip(),
               f"test window: {split.test.dates[0]}..{split.test.dates[-1]} ({split.test.n_obs} days)",
               f"cumulative={_fmt(report.cumulative_return)} sharpe={_fmt(report.sharpe)} "
               f"max_drawdown={_fmt(report.max_drawdown)}"]
    return "\n".join(summary)


def cmd_pipeline(cfg: RunConfig) -> str:
    """moments -> gmv -> frontier -> regress -> bl -> backtest on one dataset."""
    outputs = [cmd_moments(cfg)]
    outputs.append(cmd_gmv(cfg))
    outputs.append(cmd_frontier(cfg, compare_unconstrained=True))
    outputs.append(cmd_regress(cfg, weights_file=os.path.join(cfg.outdir, "gmv_weights.csv")))
    outputs.append(cmd_bl(cfg))
    outputs.append(cmd_backtest(cfg))

    stage_params: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = (
        ("moments", (("trading_days", str(cfg.trading_days)),)),
        ("gmv", (("min_weight", _r(cfg.min_weight)), ("max_weight", _r(cfg.max_weight)))),
        ("frontier", (("points", str(cfg.points)), ("compare_unconstrained", "true"))),
        ("regress", (("weights", "gmv"),)),
        ("bl", (("views", ";".join(cfg.views)), ("omega_scale", _r(cfg.omega_scale)))),
        ("backtest", (("boundary", cfg.boundary.isoformat()),)),
    )
    recipe = ExperimentRecipe(
        name="pipeline",
        stages=stage_params,
        config_digest=config_hash(cfg),
        seed=cfg.seed,
    )
    _write(cfg.outdir, "recipe.txt", recipe.serialize())
    stages = tuple(name for name, _ in stage_params)
    text = ("\n\n".join(f"== {stage} ==\n{out}" for stage, out in zip(stages, outputs))
            + "\n\npipeline complete: 6 stages\n")
    # the file stays free of machine-local paths so identical configs produce
    # identical bytes wherever the run lands; the location goes to stdout only
    _write(cfg.outdir, "pipeline_summary.txt", text)
    return text.rstrip() + f", outputs in {cfg.outdir}"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "moments":
            out = cmd_moments(cfg)
        elif args.command == "gmv":
            out = cmd_gmv(cfg)
        elif args.command == "frontier":
            out = cmd_frontier(cfg, args.compare_unconstrained)
        elif args.command == "simulate":
            out = cmd_simulate(cfg)
        elif args.command == "regress":
            out = cmd_regress(cfg, args.weights_file)
        elif args.command == "bl":
            out = cmd_bl(cfg)
        elif args.command == "backtest":
            out = cmd_backtest(cfg, args.weights_file)
        elif args.command == "pipeline":
            out = cmd_pipeline(cfg)
        elif args.command == "serve":
            from .service import run_service

            run_service(cfg)
            return 0
        else:  # unreachable with required=True, kept for safety
            parser.error(f"unknown command {args.command!r}")
            return 1
        print(out)
        return 0
    except FrontierLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
