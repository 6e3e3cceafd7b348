"""frontierlab: mean-variance portfolio construction, random-search baselines,
factor attribution, Black-Litterman allocation, and backtesting."""

__version__ = "0.1.0"

from .backtest import BacktestReport, run_backtest
from .blacklitterman import (
    BLPosterior,
    EquilibriumPrior,
    MarketPortfolio,
    ViewSet,
    bl_optimal_weights,
    build_market_portfolio,
    build_views,
    equilibrium_prior,
    equilibrium_returns,
    implied_risk_aversion,
    market_sharpe,
    posterior,
)
from .errors import DataError, FrontierLabError, InfeasibleError, SolverError
from .factors import (
    FactorPanel,
    RegressionReport,
    RobustRegressionReport,
    factor_correlations,
    load_factors,
    ols_regress,
    portfolio_excess,
    robust_regress,
)
from .market_data import (
    MomentEstimates,
    PriceSeries,
    ReturnPanel,
    SplitSpec,
    align,
    estimate_moments,
    load_prices,
    log_returns,
    split_panel,
)
from .montecarlo import (
    SimulationConfig,
    SimulationResult,
    convergence_study,
    halton_value,
    sample_portfolio,
    simulate_search,
)
from .optimizer import (
    Bounds,
    FrontierPoint,
    KKTReport,
    PortfolioWeights,
    kkt_check,
    solve_gmv,
    solve_max_sharpe,
    solve_min_variance_at_return,
    trace_frontier,
)

__all__ = [name for name in dir() if not name.startswith("_")]
