"""Shared oracles and instance generators for the test suite.

The oracles here are deliberately naive (explicit loops, textbook formulas,
brute-force enumeration): they are slow but hard to get wrong, which is what
makes them useful as references for the fast library code.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from frontierlab.market_data import MomentEstimates
from frontierlab.optimizer import Bounds


def random_spd(rng: np.random.Generator, n: int, scale: float = 0.05) -> np.ndarray:
    """Random symmetric positive-definite matrix with eigenvalues bounded away from 0."""
    a = rng.normal(size=(n, n))
    sigma = a @ a.T / n
    sigma += 0.1 * np.eye(n)
    return sigma * scale


def random_moments(rng: np.random.Generator, n: int, scale: float = 0.05) -> MomentEstimates:
    mu = rng.uniform(0.02, 0.2, size=n)
    return MomentEstimates(mu=mu, sigma=random_spd(rng, n, scale))


def random_feasible_bounds(rng: np.random.Generator, n: int) -> Bounds:
    """Box bounds guaranteed to admit a budget-feasible portfolio."""
    lower = rng.uniform(0.0, 0.6 / n, size=n)
    upper = rng.uniform(1.5 / n, 1.0, size=n)
    upper = np.maximum(upper, lower + 0.05)
    upper = np.minimum(upper, 1.0)
    # keep sum(lower) <= 1 <= sum(upper) with slack
    assert lower.sum() <= 0.6 and upper.sum() >= 1.05
    return Bounds(lower, upper)


def simplex_grid(n: int, step: float):
    """All weight vectors on the n-simplex whose coordinates are multiples of step."""
    k = round(1.0 / step)
    for combo in itertools.product(range(k + 1), repeat=n - 1):
        rest = k - sum(combo)
        if rest < 0:
            continue
        yield np.array([c / k for c in combo] + [rest / k])


def brute_force_min_variance(sigma: np.ndarray, step: float, bounds: Bounds | None = None) -> tuple[float, np.ndarray]:
    """Exhaustive grid minimum of w' sigma w over the simplex (optionally boxed)."""
    best = math.inf
    best_w = None
    n = sigma.shape[0]
    for w in simplex_grid(n, step):
        if bounds is not None and (np.any(w < bounds.lower - 1e-12) or np.any(w > bounds.upper + 1e-12)):
            continue
        v = float(w @ sigma @ w)
        if v < best:
            best, best_w = v, w
    assert best_w is not None, "grid contained no feasible point"
    return best, best_w


def brute_force_max_sharpe(mu: np.ndarray, sigma: np.ndarray, step: float, risk_free: float = 0.0) -> float:
    best = -math.inf
    for w in simplex_grid(mu.shape[0], step):
        var = float(w @ sigma @ w)
        if var <= 0:
            continue
        best = max(best, (float(mu @ w) - risk_free) / math.sqrt(var))
    return best


def two_pass_covariance(returns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Textbook two-pass sample mean/covariance with explicit loops (ddof 1)."""
    t, n = returns.shape
    mean = np.zeros(n)
    for j in range(n):
        for i in range(t):
            mean[j] += returns[i, j]
        mean[j] /= t
    cov = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            acc = 0.0
            for i in range(t):
                acc += (returns[i, a] - mean[a]) * (returns[i, b] - mean[b])
            cov[a, b] = acc / (t - 1)
    return mean, cov


def shrinkage_posterior(prior, views) -> tuple[np.ndarray, np.ndarray]:
    """Black-Litterman posterior in the P-space form.

    mu = pi + tau*Sigma P' (P tau*Sigma P' + Omega)^{-1} (q - P pi)
    M  = tau*Sigma - tau*Sigma P' (P tau*Sigma P' + Omega)^{-1} P tau*Sigma

    Independent of the library's Cholesky route, so agreement between the two
    is a real check rather than the same code run twice.
    """
    ts = prior.tau * prior.sigma
    p, q, omega = views.p, views.q, views.omega
    middle = np.linalg.solve(p @ ts @ p.T + omega, np.eye(views.k))
    mu = prior.pi + ts @ p.T @ middle @ (q - p @ prior.pi)
    m = ts - ts @ p.T @ middle @ p @ ts
    return mu, prior.sigma + m
