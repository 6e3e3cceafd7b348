"""Five-factor attribution: OLS and Huber robust regression with diagnostics.

The regression model is

    excess_t = alpha + b1*MKT_RF + b2*SMB + b3*HML + b4*RMW + b5*CMA + e_t

All inference uses T - 6 residual degrees of freedom.  The robust fit is an
M-estimator with the Huber weight function, solved by iteratively reweighted
least squares with a MAD scale recomputed from each iteration's residuals.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date

import numpy as np
from scipy import stats
from scipy.linalg import qr as scipy_qr

from .errors import DataError
from .market_data import ReturnPanel, _parse_date, _read_csv_text

_MODULE = "factors"

FACTOR_NAMES = ("mkt_rf", "smb", "hml", "rmw", "cma")
COEFFICIENT_NAMES = ("alpha", "beta_mkt", "beta_smb", "beta_hml", "beta_rmw", "beta_cma")
_N_PARAMS = 6

HUBER_DEFAULT_C = 1.345
_MAD_TO_SIGMA = 0.6745


def _readonly(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FactorPanel:
    """Daily factor returns and the risk-free rate, all as decimals."""

    dates: tuple[date, ...]
    mkt_rf: np.ndarray
    smb: np.ndarray
    hml: np.ndarray
    rmw: np.ndarray
    cma: np.ndarray
    rf: np.ndarray
    converted_from_percent: bool = False

    def __post_init__(self):
        t = len(self.dates)
        for name in FACTOR_NAMES + ("rf",):
            col = _readonly(getattr(self, name))
            object.__setattr__(self, name, col)
            if col.shape != (t,):
                raise DataError(_MODULE, "FactorPanel", f"column {name} has {col.shape[0]} rows, expected {t}")
            if t and not np.all(np.isfinite(col)):
                raise DataError(_MODULE, "FactorPanel", f"non-finite value in column {name}")

    @property
    def n_obs(self) -> int:
        return len(self.dates)

    def matrix(self) -> np.ndarray:
        """T x 5 factor matrix in the canonical column order."""
        return np.column_stack([getattr(self, name) for name in FACTOR_NAMES])

    def restrict(self, keep_dates: set[date]) -> "FactorPanel":
        idx = [i for i, d in enumerate(self.dates) if d in keep_dates]
        return FactorPanel(
            tuple(self.dates[i] for i in idx),
            *(getattr(self, name)[idx] for name in FACTOR_NAMES),
            self.rf[idx],
            self.converted_from_percent,
        )


@dataclass(frozen=True)
class RegressionReport:
    coefficients: tuple[float, ...]
    std_errors: tuple[float, ...]
    t_stats: tuple[float, ...]
    p_values: tuple[float, ...]
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    f_p_value: float
    durbin_watson: float
    jarque_bera: float
    jb_p_value: float
    kurtosis: float
    n_obs: int
    degenerate_response: bool = False

    def coefficient(self, name: str) -> float:
        return self.coefficients[COEFFICIENT_NAMES.index(name)]


@dataclass(frozen=True)
class RobustRegressionReport:
    coefficients: tuple[float, ...]
    std_errors: tuple[float, ...]
    p_values: tuple[float, ...]
    weights: np.ndarray
    iterations: int
    converged: bool
    tuning_constant: float
    scale: float
    n_obs: int = 0
    # standard errors come from the weighted information matrix and are
    # asymptotic approximations, not exact finite-sample quantities
    asymptotic_inference: bool = True

    def __post_init__(self):
        object.__setattr__(self, "weights", _readonly(self.weights))

    def coefficient(self, name: str) -> float:
        return self.coefficients[COEFFICIENT_NAMES.index(name)]


_HEADER_ALIASES = {
    "mktrf": "mkt_rf", "mktminusrf": "mkt_rf", "mkt": "mkt_rf",
    "smb": "smb", "hml": "hml", "rmw": "rmw", "cma": "cma", "rf": "rf",
}


def load_factors(source: str) -> FactorPanel:
    """Read a daily factor CSV (Mkt-RF, SMB, HML, RMW, CMA, RF columns).

    Values may be in percent or decimal; percent files are detected by any
    column having median absolute value above 0.5 and divided by 100.
    """
    op = "load_factors"
    text = _read_csv_text(source, op)
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DataError(_MODULE, op, f"{source!r}: need a header row and at least one data row")
    header = [h.strip().lower().replace("-", "").replace("_", "").replace(" ", "") for h in rows[0]]

    col_of: dict[str, int] = {}
    for i, h in enumerate(header):
        canonical = _HEADER_ALIASES.get(h)
        if canonical and canonical not in col_of:
            col_of[canonical] = i
    for name in FACTOR_NAMES + ("rf",):
        if name not in col_of:
            raise DataError(_MODULE, op, f"missing required factor column {name!r} (header was {rows[0]})")
    date_col = next((i for i, h in enumerate(header) if h in ("date", "")), 0)

    dates = []
    data = {name: [] for name in FACTOR_NAMES + ("rf",)}
    for ln, row in enumerate(rows[1:], start=2):
        dates.append(_parse_date(row[date_col], op))
        for name in FACTOR_NAMES + ("rf",):
            cell = row[col_of[name]].strip()
            try:
                data[name].append(float(cell))
            except ValueError:
                raise DataError(_MODULE, op, f"unparseable value {cell!r} in column {name} at row {ln}") from None

    arrays = {name: np.asarray(vals) for name, vals in data.items()}
    percent = any(np.median(np.abs(arrays[name])) > 0.5 for name in FACTOR_NAMES)
    if percent:
        arrays = {name: a / 100.0 for name, a in arrays.items()}
    return FactorPanel(
        tuple(dates),
        *(arrays[name] for name in FACTOR_NAMES),
        arrays["rf"],
        converted_from_percent=percent,
    )


def factor_correlations(panel: FactorPanel) -> np.ndarray:
    """Pearson correlation matrix of the five factor columns."""
    op = "factor_correlations"
    if panel.n_obs < 3:
        raise DataError(_MODULE, op, f"need at least 3 observations, got {panel.n_obs}")
    X = panel.matrix()
    sd = X.std(axis=0, ddof=1)
    flat = np.nonzero(sd <= 0.0)[0]
    if flat.size:
        raise DataError(_MODULE, op, f"zero-variance factor column {FACTOR_NAMES[flat[0]]}")
    corr = np.corrcoef(X, rowvar=False)
    return 0.5 * (corr + corr.T)


def _design_matrix(panel: FactorPanel) -> np.ndarray:
    return np.column_stack([np.ones(panel.n_obs), panel.matrix()])


def _check_rank(X: np.ndarray, operation: str) -> None:
    # pivoted QR exposes which columns are (nearly) linear combinations of others
    _, rmat, piv = scipy_qr(X, pivoting=True)
    diag = np.abs(np.diag(rmat))
    tol = max(X.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        names = [COEFFICIENT_NAMES[j] for j in sorted(piv[rank:])]
        raise DataError(_MODULE, operation, f"rank-deficient design matrix; collinear columns: {', '.join(names)}")


def ols_regress(portfolio_excess: np.ndarray, panel: FactorPanel) -> RegressionReport:
    """Ordinary least squares of a daily excess-return series on the five factors."""
    op = "ols_regress"
    y = np.asarray(portfolio_excess, dtype=np.float64)
    t = panel.n_obs
    if y.shape != (t,):
        raise DataError(_MODULE, op, f"response has {y.shape[0]} rows, factor panel has {t}")
    if t <= _N_PARAMS:
        raise DataError(_MODULE, op, f"need more than {_N_PARAMS} observations, got {t}")
    X = _design_matrix(panel)
    _check_rank(X, op)

    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = t - _N_PARAMS
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))

    # A constant response has TSS that is float noise, not exactly zero, so
    # compare against the rounding floor for data of this magnitude.
    y_scale = float(np.max(np.abs(y), initial=0.0))
    degenerate = tss <= t * (1e-12 * max(y_scale, 1e-30)) ** 2
    r2 = 0.0 if degenerate else 1.0 - rss / tss
    adj_r2 = 0.0 if degenerate else 1.0 - (1.0 - r2) * (t - 1) / dof

    sigma2 = rss / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, beta / se, 0.0)
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), dof)

    if degenerate or rss <= 1e-300:
        f_stat, f_p = 0.0, 1.0
    else:
        f_stat = (tss - rss) / (_N_PARAMS - 1) / (rss / dof)
        f_p = float(stats.f.sf(f_stat, _N_PARAMS - 1, dof))

    dw = _durbin_watson(resid)
    jb, jb_p, kurt = _jarque_bera(resid)
    return RegressionReport(
        coefficients=tuple(float(b) for b in beta),
        std_errors=tuple(float(s) for s in se),
        t_stats=tuple(float(v) for v in t_stats),
        p_values=tuple(float(p) for p in p_values),
        r_squared=float(r2),
        adj_r_squared=float(adj_r2),
        f_statistic=float(f_stat),
        f_p_value=float(f_p),
        durbin_watson=dw,
        jarque_bera=jb,
        jb_p_value=jb_p,
        kurtosis=kurt,
        n_obs=t,
        degenerate_response=degenerate,
    )


def _durbin_watson(resid: np.ndarray) -> float:
    denom = float(resid @ resid)
    if denom <= 1e-300:
        return 2.0
    return float(np.sum(np.diff(resid) ** 2) / denom)


def _jarque_bera(resid: np.ndarray) -> tuple[float, float, float]:
    t = resid.shape[0]
    centered = resid - resid.mean()
    m2 = float(np.mean(centered**2))
    if m2 <= 1e-300:
        return 0.0, 1.0, 3.0
    skew = float(np.mean(centered**3)) / m2**1.5
    kurt = float(np.mean(centered**4)) / m2**2
    jb = t / 6.0 * (skew**2 + (kurt - 3.0) ** 2 / 4.0)
    return jb, float(stats.chi2.sf(jb, 2)), kurt


def robust_regress(
    portfolio_excess: np.ndarray,
    panel: FactorPanel,
    tuning_constant: float = HUBER_DEFAULT_C,
    max_iterations: int = 50,
    tolerance: float = 1e-8,
) -> RobustRegressionReport:
    """Huber M-estimate by IRLS, starting from the OLS fit.

    Weights are w(e) = min(1, c*scale/|e|) with scale the normalized MAD of the
    current residuals; observations inside c standard deviations keep weight
    exactly 1, so clean data reproduces OLS.
    """
    op = "robust_regress"
    y = np.asarray(portfolio_excess, dtype=np.float64)
    t = panel.n_obs
    if y.shape != (t,):
        raise DataError(_MODULE, op, f"response has {y.shape[0]} rows, factor panel has {t}")
    if t <= _N_PARAMS:
        raise DataError(_MODULE, op, f"need more than {_N_PARAMS} observations, got {t}")
    if tuning_constant <= 0:
        raise DataError(_MODULE, op, f"tuning constant must be positive, got {tuning_constant}")
    X = _design_matrix(panel)
    _check_rank(X, op)

    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    weights = np.ones(t)
    scale = 0.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        resid = y - X @ beta
        med = np.median(resid)
        scale = float(np.median(np.abs(resid - med))) / _MAD_TO_SIGMA
        if scale <= 1e-14 * max(1.0, float(np.max(np.abs(y), initial=0.0))):
            # residuals are numerically zero: the fit is exact, keep all weights
            weights = np.ones(t)
            converged = True
            break
        with np.errstate(divide="ignore"):
            weights = np.minimum(1.0, tuning_constant * scale / np.abs(resid))
        weights = np.where(np.abs(resid) <= tuning_constant * scale, 1.0, weights)
        sw = np.sqrt(weights)
        new_beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
        step = float(np.max(np.abs(new_beta - beta)))
        beta = new_beta
        if step < tolerance:
            converged = True
            break

    xtwx = X.T @ (weights[:, None] * X)
    se = scale * np.sqrt(np.maximum(np.diag(np.linalg.inv(xtwx)), 0.0))
    dof = t - _N_PARAMS
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, beta / se, 0.0)
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), dof)
    return RobustRegressionReport(
        coefficients=tuple(float(b) for b in beta),
        std_errors=tuple(float(s) for s in se),
        p_values=tuple(float(p) for p in p_values),
        weights=weights,
        iterations=iterations,
        converged=converged,
        tuning_constant=tuning_constant,
        scale=scale,
        n_obs=t,
    )


def portfolio_excess(panel: ReturnPanel, weights: np.ndarray, factors: FactorPanel) -> tuple[np.ndarray, FactorPanel]:
    """Daily portfolio excess returns date-matched to the factor panel.

    The portfolio daily log return is ln(sum_i w_i exp(r_it)); dates present in
    only one of the two sources are dropped.
    """
    op = "portfolio_excess"
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (panel.n_assets,):
        raise DataError(_MODULE, op, f"{w.shape[0]} weights vs {panel.n_assets} assets")
    common = sorted(set(panel.dates) & set(factors.dates))
    if len(common) <= _N_PARAMS:
        raise DataError(_MODULE, op, f"only {len(common)} overlapping dates between returns and factors")
    pos = {d: i for i, d in enumerate(panel.dates)}
    rows = [pos[d] for d in common]
    port = np.log(np.exp(panel.returns[rows]) @ w)
    matched = factors.restrict(set(common))
    return port - matched.rf, matched
