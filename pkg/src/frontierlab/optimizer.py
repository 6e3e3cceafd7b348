"""Box-constrained mean-variance optimization.

The workhorse is a primal active-set method for quadratic programs of the form

    minimize    0.5 w'Qw + g'w
    subject to  Aw = b   (budget row, optionally a target-return row)
                lower <= w <= upper

At each iteration the equality-constrained subproblem restricted to the free
variables is solved through its KKT system; the step either reaches the
subspace minimizer (then bound multipliers are sign-checked and the most
negative one is released) or stops at the first blocking bound (which joins
the working set).  Ties break toward the lowest asset index, so results are
reproducible down to the pivot order.  For a convex objective this terminates
at a global minimizer; the iteration cap is treated as a hard failure rather
than returning a best-effort point.

Degenerate covariances get a small ridge (1e-10 * trace/N) before solving,
recorded in the result metadata.  A projected-gradient fallback covers
budget-only problems whose KKT systems are too ill-conditioned even then.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DataError, InfeasibleError, SolverError
from .market_data import MomentEstimates

_MODULE = "optimizer"

STATIONARITY_TOL = 1e-9
FEASIBILITY_TOL = 1e-10
MAX_ITERATIONS = 10_000
_RIDGE_FACTOR = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Bounds:
    """Per-asset weight box, lower[i] <= w[i] <= upper[i], both within [0, 1]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InfeasibleError(_MODULE, "Bounds", f"lower shape {lo.shape} vs upper shape {hi.shape}")
        if np.any(lo < -1e-12) or np.any(hi > 1.0 + 1e-12):
            raise InfeasibleError(_MODULE, "Bounds", "bounds must lie within [0, 1]")
        bad = np.nonzero(lo > hi + 1e-12)[0]
        if bad.size:
            raise InfeasibleError(_MODULE, "Bounds", f"lower > upper for asset index {int(bad[0])}")
        object.__setattr__(self, "lower", _readonly(np.clip(lo, 0.0, 1.0)))
        object.__setattr__(self, "upper", _readonly(np.clip(hi, 0.0, 1.0)))
        if self.lower.sum() > 1.0 + 1e-9:
            raise InfeasibleError(_MODULE, "Bounds", f"sum of lower bounds {self.lower.sum():.6f} exceeds the budget")
        if self.upper.sum() < 1.0 - 1e-9:
            raise InfeasibleError(_MODULE, "Bounds", f"sum of upper bounds {self.upper.sum():.6f} cannot reach the budget")

    @classmethod
    def box(cls, n: int, lower: float = 0.0, upper: float = 1.0) -> "Bounds":
        return cls(np.full(n, lower), np.full(n, upper))

    @property
    def n_assets(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True)
class PortfolioWeights:
    """Budget-constrained allocation with the bounds it was solved under."""

    tickers: tuple[str, ...]
    w: np.ndarray
    bounds: Bounds
    objective_value: float
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "w", _readonly(self.w))
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))
        s = float(self.w.sum())
        if abs(s - 1.0) > 1e-8:
            raise SolverError(_MODULE, "PortfolioWeights", f"weights sum to {s!r}, not 1")
        if np.any(self.w < self.bounds.lower - 1e-8) or np.any(self.w > self.bounds.upper + 1e-8):
            raise SolverError(_MODULE, "PortfolioWeights", "weights violate bounds beyond tolerance")

    def as_dict(self) -> dict[str, float]:
        return {t: float(x) for t, x in zip(self.tickers, self.w)}


@dataclass(frozen=True)
class FrontierPoint:
    target_return: float
    volatility: float
    weights: PortfolioWeights


@dataclass(frozen=True)
class KKTReport:
    """First-order optimality residuals of a candidate solution."""

    stationarity_residual: float
    primal_feasibility_residual: float
    complementarity_residual: float

    def max_residual(self) -> float:
        return max(self.stationarity_residual, self.primal_feasibility_residual, self.complementarity_residual)


def _tickers_for(moments: MomentEstimates) -> tuple[str, ...]:
    n = moments.n_assets
    if len(moments.tickers) == n:
        return moments.tickers
    return tuple(f"asset{i}" for i in range(n))


def _prepare_sigma(sigma: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetrize and, when near-singular, ridge the covariance. Returns (matrix, ridge)."""
    sym = 0.5 * (sigma + sigma.T)
    n = sym.shape[0]
    eigs = np.linalg.eigvalsh(sym)
    largest = max(float(eigs[-1]), 0.0)
    ridge = 0.0
    if float(eigs[0]) < -1e-10 * max(largest, 1e-300):
        raise SolverError(_MODULE, "solve", f"covariance not PSD: smallest eigenvalue {eigs[0]:.3e}")
    if float(eigs[0]) <= 1e-12 * max(largest, 1e-300):
        ridge = _RIDGE_FACTOR * max(np.trace(sym) / n, 1e-300)
        sym = sym + ridge * np.eye(n)
    return sym, ridge


def _greedy_fill(lower: np.ndarray, upper: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Budget-feasible point: start at the lower bounds, top up in the given order."""
    w = lower.copy()
    slack = 1.0 - w.sum()
    for i in order:
        if slack <= 0.0:
            break
        add = min(upper[i] - w[i], slack)
        w[i] += add
        slack -= add
    if slack > 1e-9:
        raise InfeasibleError(_MODULE, "solve", f"bounds admit at most total weight {w.sum():.6f}")
    return w


def feasible_return_range(mu: np.ndarray, bounds: Bounds) -> tuple[float, float]:
    """Min and max of mu'w over the budget-and-box feasible set (continuous knapsack)."""
    asc = np.argsort(mu, kind="stable")
    w_min = _greedy_fill(bounds.lower, bounds.upper, asc)
    w_max = _greedy_fill(bounds.lower, bounds.upper, asc[::-1])
    return float(mu @ w_min), float(mu @ w_max)


def _feasible_start(mu: np.ndarray | None, target: float | None, bounds: Bounds) -> np.ndarray:
    lo, hi = bounds.lower, bounds.upper
    if mu is None or target is None:
        return _greedy_fill(lo, hi, np.arange(lo.shape[0]))
    asc = np.argsort(mu, kind="stable")
    w_min = _greedy_fill(lo, hi, asc)
    w_max = _greedy_fill(lo, hi, asc[::-1])
    r_min, r_max = float(mu @ w_min), float(mu @ w_max)
    span = r_max - r_min
    if target < r_min - 1e-9 or target > r_max + 1e-9:
        raise InfeasibleError(
            _MODULE, "solve_min_variance_at_return",
            f"target {target:.6g} outside the feasible return interval [{r_min:.6g}, {r_max:.6g}]",
        )
    if span <= 1e-14:
        return w_min
    theta = min(1.0, max(0.0, (target - r_min) / span))
    return (1.0 - theta) * w_min + theta * w_max


def _solve_kkt_system(Q: np.ndarray, grad: np.ndarray, A: np.ndarray, free: np.ndarray):
    """Step to the subspace minimizer over the free variables, plus equality multipliers."""
    nf = free.shape[0]
    m = A.shape[0]
    K = np.zeros((nf + m, nf + m))
    K[:nf, :nf] = Q[np.ix_(free, free)]
    K[:nf, nf:] = A[:, free].T
    K[nf:, :nf] = A[:, free]
    rhs = np.concatenate([-grad[free], np.zeros(m)])
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("non-finite KKT solution")
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    p_free = sol[:nf]
    # the system is written with grad + A'y = 0 at the subspace minimizer;
    # flip so callers get lambda with grad - A'lambda = 0
    lam = -sol[nf:]
    if nf and np.max(np.abs(A[:, free] @ p_free)) > 1e-8:
        # inconsistent reduced system: treat as a null step and let the
        # multiplier logic change the working set
        p_free = np.zeros(nf)
    return p_free, lam


def _active_set_qp(
    Q: np.ndarray,
    g: np.ndarray,
    A: np.ndarray,
    x0: np.ndarray,
    bounds: Bounds,
    operation: str,
) -> tuple[np.ndarray, int]:
    """Minimize 0.5 x'Qx + g'x subject to Ax = Ax0 and the box. Returns (x, iterations)."""
    n = x0.shape[0]
    lo, hi = bounds.lower, bounds.upper
    x = np.clip(x0.copy(), lo, hi)

    # working set: 0 free, -1 at lower, +1 at upper, 2 pinned (lower == upper)
    ws = np.zeros(n, dtype=np.int8)
    ws[hi - x <= 1e-12] = 1
    ws[x - lo <= 1e-12] = -1
    pinned = hi - lo <= 1e-14
    ws[pinned] = 2
    x[pinned] = lo[pinned]

    grad_scale = max(1.0, float(np.max(np.abs(Q))) + float(np.max(np.abs(g))))
    mult_tol = STATIONARITY_TOL * grad_scale

    for it in range(1, MAX_ITERATIONS + 1):
        free = np.nonzero(ws == 0)[0]
        grad = Q @ x + g

        if free.size:
            p_free, lam = _solve_kkt_system(Q, grad, A, free)
        else:
            p_free, lam = np.zeros(0), np.linalg.lstsq(A.T, grad, rcond=None)[0]

        if not free.size or np.max(np.abs(p_free)) <= STATIONARITY_TOL:
            # subspace minimizer: sign-check the bound multipliers
            resid = grad - A.T @ lam
            worst = None
            worst_val = -mult_tol
            for i in range(n):
                if ws[i] == -1:
                    nu = resid[i]          # multiplier of x_i >= lo_i, must be >= 0
                elif ws[i] == 1:
                    nu = -resid[i]         # multiplier of x_i <= hi_i, must be >= 0
                else:
                    continue
                if nu < worst_val:
                    worst_val = nu
                    worst = i
            if worst is None:
                return x, it
            ws[worst] = 0
            continue

        # step toward the subspace minimizer, stopping at the first blocking bound
        alpha = 1.0
        blocker = -1
        block_side = 0
        for k, i in enumerate(free):
            pi = p_free[k]
            if pi > 1e-15:
                a = (hi[i] - x[i]) / pi
                side = 1
            elif pi < -1e-15:
                a = (lo[i] - x[i]) / pi
                side = -1
            else:
                continue
            if a < alpha - 1e-15:
                alpha, blocker, block_side = a, i, side
        alpha = max(alpha, 0.0)
        x[free] += alpha * p_free
        if blocker >= 0:
            ws[blocker] = block_side
            x[blocker] = hi[blocker] if block_side == 1 else lo[blocker]
        x = np.clip(x, lo, hi)

    raise SolverError(_MODULE, operation, f"active-set method did not converge within {MAX_ITERATIONS} iterations")


def _project_budget_box(v: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Euclidean projection onto {sum w = 1, lower <= w <= upper} by dual bisection."""
    lo, hi = bounds.lower, bounds.upper

    def total(t: float) -> float:
        return float(np.clip(v - t, lo, hi).sum())

    t_lo, t_hi = np.min(v - hi) - 1.0, np.max(v - lo) + 1.0
    for _ in range(200):
        mid = 0.5 * (t_lo + t_hi)
        if total(mid) > 1.0:
            t_lo = mid
        else:
            t_hi = mid
    return np.clip(v - 0.5 * (t_lo + t_hi), lo, hi)


def _projected_gradient(Q: np.ndarray, g: np.ndarray, x0: np.ndarray, bounds: Bounds, operation: str) -> np.ndarray:
    step = 1.0 / max(float(np.linalg.eigvalsh(Q)[-1]), 1e-12)
    x = _project_budget_box(x0, bounds)
    for _ in range(200_000):
        x_new = _project_budget_box(x - step * (Q @ x + g), bounds)
        if np.max(np.abs(x_new - x)) < 1e-12:
            return x_new
        x = x_new
    raise SolverError(_MODULE, operation, "projected-gradient fallback did not converge")


def _solve_qp(
    moments: MomentEstimates,
    bounds: Bounds,
    operation: str,
    target: float | None = None,
    linear_term: np.ndarray | None = None,
    quad_scale: float = 2.0,
) -> PortfolioWeights:
    """Shared driver: minimize 0.5 quad_scale w'Σw + linear'w under budget/box (+ return row)."""
    mu = moments.mu
    n = moments.n_assets
    if bounds.n_assets != n:
        raise InfeasibleError(_MODULE, operation, f"bounds length {bounds.n_assets} vs {n} assets")
    sigma, ridge = _prepare_sigma(moments.sigma)
    Q = quad_scale * sigma
    g = np.zeros(n) if linear_term is None else np.asarray(linear_term, dtype=np.float64)

    if target is None:
        A = np.ones((1, n))
        x0 = _feasible_start(None, None, bounds)
    else:
        A = np.vstack([np.ones(n), mu])
        x0 = _feasible_start(mu, target, bounds)

    method = "active-set"
    try:
        x, iters = _active_set_qp(Q, g, A, x0, bounds, operation)
    except SolverError:
        raise
    except np.linalg.LinAlgError:
        if target is not None:
            raise SolverError(_MODULE, operation, "KKT factorization failed on the return-constrained problem")
        x = _projected_gradient(Q, g, x0, bounds, operation)
        iters = -1
        method = "projected-gradient"

    sigma_plain = 0.5 * (moments.sigma + moments.sigma.T)
    variance = float(x @ sigma_plain @ x)
    meta = {"iterations": iters, "method": method, "ridge": ridge}
    if target is not None:
        meta["target_return"] = target
    return PortfolioWeights(_tickers_for(moments), x, bounds, variance, meta)


def solve_gmv(moments: MomentEstimates, bounds: Bounds) -> PortfolioWeights:
    """Global minimum-variance portfolio under the budget and box constraints."""
    return _solve_qp(moments, bounds, "solve_gmv")


def solve_min_variance_at_return(moments: MomentEstimates, bounds: Bounds, target: float) -> PortfolioWeights:
    """Minimum-variance portfolio whose expected return equals `target`."""
    return _solve_qp(moments, bounds, "solve_min_variance_at_return", target=float(target))


def solve_utility(moments: MomentEstimates, bounds: Bounds, risk_aversion: float) -> PortfolioWeights:
    """Maximize mu'w - (risk_aversion/2) w'Σw under the budget and box constraints."""
    if risk_aversion <= 0.0:
        raise InfeasibleError(_MODULE, "solve_utility", f"risk aversion must be positive, got {risk_aversion}")
    return _solve_qp(moments, bounds, "solve_utility", linear_term=-moments.mu, quad_scale=risk_aversion)


def portfolio_volatility(moments: MomentEstimates, w: np.ndarray) -> float:
    sigma = 0.5 * (moments.sigma + moments.sigma.T)
    return math.sqrt(max(float(w @ sigma @ w), 0.0))


def solve_max_sharpe(moments: MomentEstimates, bounds: Bounds, risk_free: float = 0.0) -> PortfolioWeights:
    """Maximum-Sharpe portfolio via a frontier sweep plus golden-section refinement.

    The Sharpe ratio is quasiconcave along the efficient frontier, so a coarse
    64-point sweep brackets the maximizer and golden-section search pins it down.
    """
    op = "solve_max_sharpe"
    r_min, r_max = feasible_return_range(moments.mu, bounds)
    if r_max <= risk_free + 1e-14:
        raise InfeasibleError(_MODULE, op, f"no feasible portfolio earns more than risk_free={risk_free:.6g}; max feasible return is {r_max:.6g}")

    def sharpe_at(t: float) -> float:
        w = solve_min_variance_at_return(moments, bounds, t)
        vol = math.sqrt(max(w.objective_value, 0.0))
        if vol < 1e-15:
            return math.inf if t > risk_free else -math.inf
        return (t - risk_free) / vol

    if r_max - r_min <= 1e-14:
        best_t = r_max
    else:
        grid = np.linspace(max(r_min, risk_free), r_max, 64)
        scores = [sharpe_at(t) for t in grid]
        k = int(np.argmax(scores))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c = b - inv_phi * (b - a)
        d = a + inv_phi * (b - a)
        fc, fd = sharpe_at(c), sharpe_at(d)
        for _ in range(64):
            if b - a < 1e-11 * max(1.0, abs(b)):
                break
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - inv_phi * (b - a)
                fc = sharpe_at(c)
            else:
                a, c, fc = c, d, fd
                d = a + inv_phi * (b - a)
                fd = sharpe_at(d)
        candidates = [0.5 * (a + b), grid[k], r_max]
        best_t = max(candidates, key=sharpe_at)

    out = solve_min_variance_at_return(moments, bounds, best_t)
    vol = math.sqrt(max(out.objective_value, 0.0))
    meta = dict(out.meta)
    meta["sharpe"] = (best_t - risk_free) / vol if vol > 1e-15 else math.inf
    meta["risk_free"] = risk_free
    return PortfolioWeights(out.tickers, out.w, bounds, out.objective_value, meta)


def trace_frontier(moments: MomentEstimates, bounds: Bounds, n_points: int = 50) -> list[FrontierPoint]:
    """Efficient frontier at n_points equally spaced targets across the feasible return interval."""
    if n_points < 2:
        raise DataError(_MODULE, "trace_frontier", f"n_points must be >= 2, got {n_points}")
    r_min, r_max = feasible_return_range(moments.mu, bounds)
    points = []
    for t in np.linspace(r_min, r_max, n_points):
        w = solve_min_variance_at_return(moments, bounds, float(t))
        points.append(FrontierPoint(float(t), math.sqrt(max(w.objective_value, 0.0)), w))
    return points


def kkt_check(
    weights: PortfolioWeights,
    moments: MomentEstimates,
    bounds: Bounds | None = None,
    target_return: float | None = None,
) -> KKTReport:
    """First-order optimality residuals for a minimum-variance solution.

    Multipliers for the budget row (and the target-return row, when the
    solution came from the return-constrained problem) plus all active bounds
    are recovered by least squares against the gradient 2Σw; stationarity is
    the max-norm of what the recovered multipliers fail to explain.
    Complementarity is max_i |multiplier_i| * slack_i over the bound
    constraints, which vanishes when active bounds are exactly tight.
    """
    if bounds is None:
        bounds = weights.bounds
    w = weights.w
    sigma = 0.5 * (moments.sigma + moments.sigma.T)
    grad = 2.0 * sigma @ w

    feas = abs(float(w.sum()) - 1.0)
    feas = max(feas, float(np.max(np.maximum(bounds.lower - w, 0.0), initial=0.0)))
    feas = max(feas, float(np.max(np.maximum(w - bounds.upper, 0.0), initial=0.0)))
    if target_return is not None:
        feas = max(feas, abs(float(moments.mu @ w) - target_return))

    atol = 1e-8
    lower_active = np.nonzero(w - bounds.lower <= atol)[0]
    upper_active = np.nonzero(bounds.upper - w <= atol)[0]
    cols = [np.ones_like(w)]
    if target_return is not None:
        cols.append(moments.mu)
    n = w.shape[0]
    for i in lower_active:
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(e)
    for i in upper_active:
        if i in lower_active:
            continue  # pinned variable, one column is enough
        e = np.zeros(n)
        e[i] = -1.0
        cols.append(e)
    C = np.column_stack(cols)
    m, *_ = np.linalg.lstsq(C, grad, rcond=None)
    stationarity = float(np.max(np.abs(grad - C @ m)))

    n_eq = 1 + (target_return is not None)
    slack = np.minimum(np.abs(w - bounds.lower), np.abs(bounds.upper - w))
    comp = 0.0
    for j, i in enumerate(list(lower_active) + [i for i in upper_active if i not in lower_active]):
        comp = max(comp, abs(float(m[n_eq + j])) * float(slack[i]))
    return KKTReport(stationarity, feas, comp)
