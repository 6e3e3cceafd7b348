"""Random portfolio search over the simplex, with rejection under box constraints.

Three samplers are supported:

* ``dirichlet`` -- uniform on the simplex (Dirichlet with unit concentration,
  drawn as normalized exponentials);
* ``uniform_normalized`` -- N uniforms divided by their sum (NOT uniform on the
  simplex; kept because naive implementations use it);
* ``halton`` -- quasi-random points mapped through the ordered-uniform-spacings
  transform, which preserves the low-discrepancy structure.

Randomness comes from numpy's Philox counter-based generator keyed by the
config seed.  Each sample index owns a fixed, disjoint counter range, so the
search can be partitioned across workers at any boundary and still reproduce
the single-threaded result bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np
from numpy.random import Generator, Philox

from .errors import DataError, SolverError
from .market_data import MomentEstimates
from .optimizer import Bounds, PortfolioWeights

_MODULE = "montecarlo"

_SAMPLERS = ("dirichlet", "uniform_normalized", "halton")
_OBJECTIVES = ("min_variance", "max_sharpe")
_TRACE_GRID = 1000
_CHUNK = 8192
# one Philox counter block yields 4 uint64 outputs; reserving whole blocks per
# sample keeps partitioned runs identical to single-threaded ones
_DRAWS_PER_BLOCK = 4


@dataclass(frozen=True)
class SimulationConfig:
    n_samples: int
    sampler: str = "dirichlet"
    seed: int = 0
    bounds: Bounds | None = None
    objective: str = "min_variance"
    risk_free: float = 0.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise DataError(_MODULE, "SimulationConfig", f"n_samples must be >= 1, got {self.n_samples}")
        if self.sampler not in _SAMPLERS:
            raise DataError(_MODULE, "SimulationConfig", f"unknown sampler {self.sampler!r}; expected one of {_SAMPLERS}")
        if self.objective not in _OBJECTIVES:
            raise DataError(_MODULE, "SimulationConfig", f"unknown objective {self.objective!r}; expected one of {_OBJECTIVES}")
        if not 0 <= self.seed < 2**64:
            raise DataError(_MODULE, "SimulationConfig", "seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimulationResult:
    best_weights: PortfolioWeights
    best_objective: float
    accepted: int
    rejected: int
    trace: tuple[tuple[int, float], ...]
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))


def first_primes(k: int) -> list[int]:
    """The first k primes, by trial division (k is tiny here)."""
    primes: list[int] = []
    n = 2
    while len(primes) < k:
        if all(n % p for p in primes if p * p <= n):
            primes.append(n)
        n += 1
    return primes


def halton_value(index: int, base: int) -> float:
    """Radical inverse of `index` in `base`: reverse the digits across the radix point."""
    if index < 1:
        raise DataError(_MODULE, "halton_value", f"index must be >= 1, got {index}")
    if base < 2:
        raise DataError(_MODULE, "halton_value", f"base must be >= 2, got {base}")
    value = 0.0
    scale = 1.0 / base
    n = index
    while n > 0:
        n, digit = divmod(n, base)
        value += digit * scale
        scale /= base
    return value


def _spacings_to_simplex(u: np.ndarray) -> np.ndarray:
    """Map a point in [0,1)^(N-1) to the simplex via ordered uniform spacings."""
    cuts = np.sort(u)
    return np.diff(np.concatenate([[0.0], cuts, [1.0]]))


def _halton_point(index: int, bases: Iterable[int]) -> np.ndarray:
    return np.array([halton_value(index, b) for b in bases])


def halton_simplex_point(index: int, n_assets: int, bases: list[int] | None = None) -> np.ndarray:
    if bases is None:
        bases = first_primes(n_assets - 1)
    if n_assets == 1:
        return np.array([1.0])
    return _spacings_to_simplex(_halton_point(index, bases))


def _philox_generator(seed: int, start_block: int) -> Generator:
    bits = Philox(key=seed)
    if start_block:
        bits = bits.advance(start_block)
    return Generator(bits)


def sample_portfolio(sampler: str, n_assets: int, draw) -> np.ndarray:
    """One point on the unit simplex.

    `draw` is a Halton index (int) for the halton sampler, or a numpy Generator
    for the stochastic samplers.
    """
    op = "sample_portfolio"
    if n_assets < 1:
        raise DataError(_MODULE, op, f"need at least one asset, got {n_assets}")
    if n_assets == 1:
        return np.array([1.0])
    if sampler == "halton":
        if not isinstance(draw, (int, np.integer)):
            raise DataError(_MODULE, op, "halton sampler needs an integer draw index")
        return halton_simplex_point(int(draw), n_assets)
    if not isinstance(draw, Generator):
        raise DataError(_MODULE, op, f"{sampler} sampler needs a numpy Generator")
    u = draw.random(n_assets)
    if sampler == "dirichlet":
        e = -np.log1p(-u)
        return e / e.sum()
    if sampler == "uniform_normalized":
        s = u.sum()
        if s <= 0.0:
            return np.full(n_assets, 1.0 / n_assets)
        return u / s
    raise DataError(_MODULE, op, f"unknown sampler {sampler!r}")


def _sample_chunk(sampler: str, seed: int, n_assets: int, start: int, stop: int, bases: list[int] | None = None) -> np.ndarray:
    """Samples for indices [start, stop), shaped (stop-start, N)."""
    count = stop - start
    if sampler == "halton":
        if n_assets == 1:
            return np.ones((count, 1))
        if bases is None:
            bases = first_primes(n_assets - 1)
        pts = np.empty((count, n_assets - 1))
        for row, idx in enumerate(range(start + 1, stop + 1)):  # Halton indices are 1-based
            pts[row] = _halton_point(idx, bases)
        cuts = np.sort(pts, axis=1)
        zeros = np.zeros((count, 1))
        ones = np.ones((count, 1))
        return np.diff(np.hstack([zeros, cuts, ones]), axis=1)

    blocks_per_sample = max(1, math.ceil(n_assets / _DRAWS_PER_BLOCK))
    gen = _philox_generator(seed, start * blocks_per_sample)
    u = gen.random(count * blocks_per_sample * _DRAWS_PER_BLOCK).reshape(count, -1)[:, :n_assets]
    if n_assets == 1:
        return np.ones((count, 1))
    if sampler == "dirichlet":
        e = -np.log1p(-u)
        return e / e.sum(axis=1, keepdims=True)
    sums = u.sum(axis=1, keepdims=True)
    sums[sums <= 0.0] = 1.0
    return u / sums


def _objective_values(w: np.ndarray, mu: np.ndarray, sigma: np.ndarray, objective: str, risk_free: float) -> np.ndarray:
    variances = np.einsum("ij,jk,ik->i", w, sigma, w)
    if objective == "min_variance":
        return variances
    excess = w @ mu - risk_free
    vols = np.sqrt(np.maximum(variances, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        sharpe = np.where(vols > 1e-15, excess / vols, np.where(excess > 0, np.inf, -np.inf))
    return sharpe


def simulate_search(moments: MomentEstimates, config: SimulationConfig) -> SimulationResult:
    """Draw random portfolios, reject bound violators, keep the best survivor.

    Deterministic for a fixed (moments, config): the Philox counter stream is
    keyed by the seed and indexed by sample number, and ties on the objective
    go to the lowest sample index.
    """
    op = "simulate_search"
    n = moments.n_assets
    bounds = config.bounds if config.bounds is not None else Bounds.box(n)
    if bounds.n_assets != n:
        raise DataError(_MODULE, op, f"bounds length {bounds.n_assets} vs {n} assets")
    sigma = 0.5 * (moments.sigma + moments.sigma.T)
    mu = moments.mu
    minimize = config.objective == "min_variance"
    bases = first_primes(n - 1) if config.sampler == "halton" else []

    best_obj = math.inf if minimize else -math.inf
    best_w: np.ndarray | None = None
    best_idx = -1
    accepted = 0
    improvements: list[tuple[int, float]] = []

    for start in range(0, config.n_samples, _CHUNK):
        stop = min(start + _CHUNK, config.n_samples)
        w = _sample_chunk(config.sampler, config.seed, n, start, stop, bases)
        ok = np.all((w >= bounds.lower) & (w <= bounds.upper), axis=1)
        accepted += int(ok.sum())
        objs = _objective_values(w[ok], mu, sigma, config.objective, config.risk_free)
        ok_idx = np.nonzero(ok)[0]
        for local, obj in zip(ok_idx, objs):
            obj = float(obj)
            if (obj < best_obj) if minimize else (obj > best_obj):
                best_obj = obj
                best_w = w[local]
                best_idx = start + int(local)
                improvements.append((best_idx, obj))

    rejected = config.n_samples - accepted
    if best_w is None:
        rate = rejected / config.n_samples
        raise SolverError(
            _MODULE, op,
            f"all {config.n_samples} samples rejected (rejection rate {rate:.1%}); "
            "increase n_samples or loosen the bounds",
        )

    # improvements plus a fixed decimated grid of running-best checkpoints
    grid_step = max(1, math.ceil(config.n_samples / _TRACE_GRID))
    entries = dict(improvements)
    running = improvements[0][1]
    pos = 0
    for gidx in range(0, config.n_samples, grid_step):
        while pos < len(improvements) and improvements[pos][0] <= gidx:
            running = improvements[pos][1]
            pos += 1
        if gidx >= improvements[0][0]:
            entries.setdefault(gidx, running)
    trace = sorted(entries.items())
    weights = PortfolioWeights(
        _tickers_for(moments, n), best_w, bounds, float(best_w @ sigma @ best_w),
        meta={"sample_index": best_idx, "sampler": config.sampler, "rng": "philox4x64", "seed": config.seed},
    )
    return SimulationResult(
        best_weights=weights,
        best_objective=best_obj,
        accepted=accepted,
        rejected=rejected,
        trace=tuple(trace),
        meta={"rng": "philox4x64", "seed": config.seed, "sampler": config.sampler, "objective": config.objective},
    )


def _tickers_for(moments: MomentEstimates, n: int) -> tuple[str, ...]:
    if len(moments.tickers) == n:
        return moments.tickers
    return tuple(f"asset{i}" for i in range(n))


@dataclass(frozen=True)
class ConvergenceRow:
    samples: int
    mean_gap: float
    stddev_gap: float
    repetitions: int


def convergence_study(
    moments: MomentEstimates,
    config: SimulationConfig,
    sample_counts: list[int],
    repetitions: int,
    qp_objective: float | None = None,
) -> list[ConvergenceRow]:
    """Relative objective gap vs the QP optimum, averaged over independent seeds.

    The template config supplies sampler/bounds/objective; each repetition r
    reruns with seed = config.seed + r.  min_variance only, since the gap is
    defined against the QP lower bound.
    """
    op = "convergence_study"
    if config.objective != "min_variance":
        raise DataError(_MODULE, op, "convergence gaps are defined for the min_variance objective")
    if repetitions < 1:
        raise DataError(_MODULE, op, f"repetitions must be >= 1, got {repetitions}")
    if qp_objective is None:
        from .optimizer import solve_gmv

        bounds = config.bounds if config.bounds is not None else Bounds.box(moments.n_assets)
        qp_objective = solve_gmv(moments, bounds).objective_value
    if qp_objective <= 0.0:
        raise DataError(_MODULE, op, "QP optimum must be positive for a relative gap")

    rows = []
    for count in sample_counts:
        gaps = np.empty(repetitions)
        for r in range(repetitions):
            cfg = SimulationConfig(
                n_samples=count, sampler=config.sampler, seed=config.seed + r,
                bounds=config.bounds, objective=config.objective, risk_free=config.risk_free,
            )
            result = simulate_search(moments, cfg)
            gaps[r] = (result.best_objective - qp_objective) / qp_objective
        rows.append(ConvergenceRow(count, float(gaps.mean()), float(gaps.std(ddof=1)) if repetitions > 1 else 0.0, repetitions))
    return rows


def convergence_csv(rows: list[ConvergenceRow]) -> str:
    lines = ["samples,mean_gap,stddev_gap,repetitions"]
    for row in rows:
        lines.append(f"{row.samples},{row.mean_gap!r},{row.stddev_gap!r},{row.repetitions}")
    return "\n".join(lines) + "\n"
