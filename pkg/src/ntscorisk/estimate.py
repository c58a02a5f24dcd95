"""Three-step parameter estimation from panels of log returns.

The pipeline mirrors the construction of the market model: each series is
z-scored, the standardized index residual determines the shared
subordinator parameters, the stock residuals determine their skews, and
the normal-layer correlation is backed out of the sample covariance.

Step 1 fits (alpha, theta, beta0) to the index residuals by least squares
between the model cdf and a Gaussian-kernel empirical cdf on a fixed grid,
using Nelder-Mead from five starts on a smooth reparameterization of the
admissible box.  Step 2 repeats the one-dimensional beta fit per stock
with (alpha, theta) frozen; with the subordinator grid cached, the model
cdf there is a cheap normal mixture.  Step 3 inverts the residual
covariance identity cov = gamma_n gamma_m rho_{nm} + beta_n beta_m fac for
the correlation matrix and projects the result back to a valid correlation
matrix when sampling noise pushes it off the cone.

Goodness of fit is summarized per series by the Kolmogorov-Smirnov
statistic against the fitted marginal with the asymptotic p-value, which
ignores parameter-estimation effects.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import expit, ndtr
from scipy.stats import kstwobign

from .errors import DegenerateSeries, FitNotConverged
from .market import MarketModel
from .nts_core import (
    StdNtsParams,
    SubordinatorParams,
    beta_bound,
    gamma_from_beta,
    grid_for,
    mixture_marginal_cdf,
    stdnts_marginal_cdf,
)

__all__ = [
    "FIT_GRID",
    "ReturnPanel",
    "FitReport",
    "read_returns_csv",
    "zscore",
    "kde_cdf",
    "fit_step1",
    "fit_step2",
    "fit_step3",
    "ks_test",
    "fit_model",
]

#: Curve-fit abscissae in residual units.
FIT_GRID = np.linspace(-6.0, 6.0, 201)

_ALPHA_LO, _ALPHA_HI = 0.1, 1.95
_LOG_THETA_LO, _LOG_THETA_HI = np.log(1e-4), np.log(1e2)
_BETA_SHRINK = 0.995
_MIN_ROWS = 250


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned per-period log returns with a designated index series.

    Attributes
    ----------
    dates : list of str
        Observation dates, ISO format, one per row.
    series : dict of str to ndarray
        Log returns per symbol; equal lengths, at least 250 rows.
    index_symbol : str
        Which series plays the index role.
    """

    dates: list
    series: dict
    index_symbol: str

    def __post_init__(self) -> None:
        if self.index_symbol not in self.series:
            raise ValueError(f"index symbol {self.index_symbol!r} not among series")
        n = len(self.dates)
        if n < _MIN_ROWS:
            raise ValueError(f"need at least {_MIN_ROWS} rows, got {n}")
        for sym, vals in self.series.items():
            if len(vals) != n:
                raise ValueError(f"series {sym!r} length {len(vals)} != {n} dates")

    @property
    def symbols(self) -> list:
        """Symbols with the index first, others in insertion order."""
        rest = [s for s in self.series if s != self.index_symbol]
        return [self.index_symbol] + rest


@dataclass(frozen=True)
class ZScore:
    """Standardized series with its sample moments.

    Attributes
    ----------
    residuals : ndarray
        Zero-mean unit-sd residuals (ddof=1).
    mu, sigma : float
        Sample mean and standard deviation removed.
    """

    residuals: np.ndarray
    mu: float
    sigma: float


@dataclass(frozen=True)
class FitReport:
    """Estimated model with per-series goodness of fit.

    Attributes
    ----------
    alpha, theta : float
        Shared subordinator parameters.
    beta : ndarray, shape (N+1,)
        Skews, index first.
    sigma_corr : ndarray, shape (N+1, N+1)
        Normal-layer correlation matrix.
    mu, sigma : ndarray, shape (N+1,)
        Sample return moments.
    ks_stats, ks_pvalues : ndarray, shape (N+1,)
        KS distance and asymptotic p-value per series.
    symbols : list of str
        Series names, index first.
    """

    alpha: float
    theta: float
    beta: np.ndarray
    sigma_corr: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    ks_stats: np.ndarray
    ks_pvalues: np.ndarray
    symbols: list = field(default_factory=list)

    def to_model(self) -> MarketModel:
        """Assemble the estimated :class:`MarketModel`."""
        nts = StdNtsParams(
            sub=SubordinatorParams(alpha=self.alpha, theta=self.theta),
            beta=self.beta,
            sigma_corr=self.sigma_corr,
        )
        return MarketModel(mu=self.mu, sigma=self.sigma, nts=nts)

    def to_dict(self) -> dict:
        """Model JSON structure extended with the KS columns."""
        from .market import model_to_dict

        doc = model_to_dict(self.to_model(), self.symbols or None)
        doc["ks_stats"] = [float(x) for x in self.ks_stats]
        doc["ks_pvalues"] = [float(x) for x in self.ks_pvalues]
        return doc


def read_returns_csv(path, index_symbol: str) -> ReturnPanel:
    """Parse a return panel from ``date,<SYM1>,<SYM2>,...`` CSV.

    Parameters
    ----------
    path : path-like
        CSV file with an ISO date column and decimal log returns.
    index_symbol : str
        Column holding the index returns.

    Returns
    -------
    ReturnPanel

    Raises
    ------
    ValueError
        On malformed headers, short rows, or unparseable cells; messages
        name the offending row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV") from None
        if not header or header[0].strip().lower() != "date":
            raise ValueError("first CSV column must be 'date'")
        syms = [h.strip() for h in header[1:]]
        if len(syms) < 2:
            raise ValueError("need the index and at least one asset column")
        dates = []
        cols: list[list[float]] = [[] for _ in syms]
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(syms) + 1:
                raise ValueError(f"row {row_no}: expected {len(syms) + 1} cells, got {len(row)}")
            dates.append(row[0].strip())
            for j, cell in enumerate(row[1:]):
                text = cell.strip()
                if not text:
                    raise ValueError(f"row {row_no}: missing value in column {syms[j]!r}")
                try:
                    cols[j].append(float(text))
                except ValueError:
                    raise ValueError(
                        f"row {row_no}: cannot parse {text!r} in column {syms[j]!r}"
                    ) from None
    series = {sym: np.asarray(vals) for sym, vals in zip(syms, cols)}
    return ReturnPanel(dates=dates, series=series, index_symbol=index_symbol)


def zscore(series) -> ZScore:
    """Standardize a series by its sample mean and sd (ddof=1).

    Raises
    ------
    DegenerateSeries
        On fewer than 2 points or zero sample variance.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        raise DegenerateSeries("need at least 2 observations")
    mu = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if sd <= 0.0 or not np.isfinite(sd):
        raise DegenerateSeries("series has zero sample variance")
    return ZScore(residuals=(x - mu) / sd, mu=mu, sigma=sd)


def kde_cdf(residuals, grid) -> np.ndarray:
    """Gaussian-kernel empirical cdf on a grid, Silverman bandwidth.

    Parameters
    ----------
    residuals : array_like, shape (n,)
        At least 30 points.
    grid : array_like
        Evaluation abscissae.

    Returns
    -------
    ndarray
        Values in [0, 1], nondecreasing along an increasing grid.
    """
    x = np.asarray(residuals, dtype=float)
    if x.size < 30:
        raise ValueError("kernel cdf needs at least 30 points")
    grid = np.asarray(grid, dtype=float)
    h = 1.06 * float(np.std(x, ddof=1)) * x.size ** (-0.2)
    # Accumulate over sample chunks to bound the (grid x sample) matrix.
    out = np.zeros(grid.size)
    step = 20000
    for i in range(0, x.size, step):
        out += ndtr((grid[:, None] - x[None, i : i + step]) / h).sum(axis=1)
    return out / x.size


def _unpack_params(z: np.ndarray) -> tuple[float, float, float]:
    """Map unconstrained coordinates onto the open admissible box."""
    alpha = _ALPHA_LO + (_ALPHA_HI - _ALPHA_LO) * float(expit(z[0]))
    log_theta = _LOG_THETA_LO + (_LOG_THETA_HI - _LOG_THETA_LO) * float(expit(z[1]))
    theta = float(np.exp(log_theta))
    p = SubordinatorParams(alpha=alpha, theta=theta)
    beta = float(np.tanh(z[2])) * _BETA_SHRINK * beta_bound(p)
    return alpha, theta, beta


def _pack_params(alpha: float, theta: float, b: float) -> np.ndarray:
    """Inverse of :func:`_unpack_params` with b the beta fraction."""

    def logit(q: float) -> float:
        return float(np.log(q / (1.0 - q)))

    za = logit((alpha - _ALPHA_LO) / (_ALPHA_HI - _ALPHA_LO))
    zt = logit((np.log(theta) - _LOG_THETA_LO) / (_LOG_THETA_HI - _LOG_THETA_LO))
    zb = float(np.arctanh(np.clip(b, -0.999, 0.999)))
    return np.array([za, zt, zb])


def fit_step1(index_residuals) -> dict:
    """Fit (alpha, theta, beta0) to the standardized index residuals.

    Least squares between the model cdf and the kernel cdf on
    :data:`FIT_GRID`, minimized by Nelder-Mead from five spread starts.

    Returns
    -------
    dict
        {"alpha", "theta", "beta0", "objective"}.

    Raises
    ------
    FitNotConverged
        If no start produces a finite, sane objective.
    """
    target = kde_cdf(index_residuals, FIT_GRID)

    def objective(z: np.ndarray) -> float:
        try:
            alpha, theta, beta = _unpack_params(z)
            model_cdf = stdnts_marginal_cdf(FIT_GRID, SubordinatorParams(alpha, theta), beta)
        except Exception:
            return np.inf
        return float(np.sum((model_cdf - target) ** 2))

    starts = [
        _pack_params(1.2, 0.5, 0.0),
        _pack_params(1.6, 2.0, 0.0),
        _pack_params(0.8, 0.1, 0.0),
        _pack_params(1.9, 10.0, 0.0),
        _pack_params(1.0, 1.0, -0.3),
    ]
    best = None
    for z0 in starts:
        res = minimize(
            objective,
            z0,
            method="Nelder-Mead",
            options={"xatol": 1e-5, "fatol": 1e-12, "maxiter": 600, "maxfev": 900},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun) or best.fun > 0.5:
        raise FitNotConverged("index curve fit failed from all starts")
    alpha, theta, beta0 = _unpack_params(best.x)
    return {"alpha": alpha, "theta": theta, "beta0": beta0, "objective": float(best.fun)}


def fit_step2(stock_residuals, alpha: float, theta: float) -> float:
    """Fit one skew with the subordinator parameters frozen.

    One-dimensional least squares over beta on the same grid objective;
    the subordinator grid is cached, so the model cdf is a plain normal
    mixture per trial.

    Returns
    -------
    float
        Fitted beta.

    Raises
    ------
    FitNotConverged
        If the bounded scalar search fails.
    """
    p = SubordinatorParams(alpha=alpha, theta=theta)
    grid = grid_for(p)
    target = kde_cdf(stock_residuals, FIT_GRID)
    half = _BETA_SHRINK * beta_bound(p)

    def objective(beta: float) -> float:
        model_cdf = mixture_marginal_cdf(FIT_GRID, p, beta, grid)
        return float(np.sum((model_cdf - target) ** 2))

    res = minimize_scalar(
        objective, bounds=(-half, half), method="bounded", options={"xatol": 1e-8}
    )
    if not res.success or not np.isfinite(res.fun):
        raise FitNotConverged("skew curve fit failed")
    return float(res.x)


def fit_step3(residual_matrix, alpha: float, theta: float, betas) -> np.ndarray:
    """Back the correlation matrix out of the residual covariance.

    Inverts cov = gamma_n gamma_m rho + beta_n beta_m fac entrywise, clips
    to [-0.999, 0.999], and projects to the nearest valid correlation
    matrix (eigenvalue floor 1e-8, unit diagonal restored).

    Parameters
    ----------
    residual_matrix : array_like, shape (n, N+1)
        Aligned standardized residuals, index column first.
    alpha, theta : float
    betas : array_like, shape (N+1,)

    Returns
    -------
    ndarray, shape (N+1, N+1)
    """
    resid = np.asarray(residual_matrix, dtype=float)
    p = SubordinatorParams(alpha=alpha, theta=theta)
    betas = np.asarray(betas, dtype=float)
    gammas = gamma_from_beta(p, betas)
    fac = p.t_variance

    cov = np.cov(resid, rowvar=False, ddof=1)
    rho = (cov - np.outer(betas, betas) * fac) / np.outer(gammas, gammas)
    rho = np.clip(rho, -0.999, 0.999)
    np.fill_diagonal(rho, 1.0)
    rho = 0.5 * (rho + rho.T)

    vals, vecs = np.linalg.eigh(rho)
    if vals.min() < 1e-8:
        vals = np.clip(vals, 1e-8, None)
        rho = (vecs * vals) @ vecs.T
        d = np.sqrt(np.diag(rho))
        rho = rho / np.outer(d, d)
        rho = 0.5 * (rho + rho.T)
        np.fill_diagonal(rho, 1.0)
    return rho


def ks_test(residuals, alpha: float, theta: float, beta: float) -> dict:
    """Kolmogorov-Smirnov distance to a fitted marginal, asymptotic p.

    Returns
    -------
    dict
        {"statistic", "pvalue"}.
    """
    x = np.sort(np.asarray(residuals, dtype=float))
    n = x.size
    p = SubordinatorParams(alpha=alpha, theta=theta)
    grid = grid_for(p)
    cdf_vals = mixture_marginal_cdf(x, p, beta, grid)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    stat = float(np.max(np.maximum(np.abs(cdf_vals - upper), np.abs(cdf_vals - lower))))
    pvalue = float(kstwobign.sf(np.sqrt(n) * stat))
    return {"statistic": stat, "pvalue": min(1.0, max(0.0, pvalue))}


def fit_model(panel: ReturnPanel) -> FitReport:
    """Run the full three-step pipeline on a return panel.

    Returns
    -------
    FitReport
    """
    symbols = panel.symbols
    scored = {sym: zscore(panel.series[sym]) for sym in symbols}

    step1 = fit_step1(scored[symbols[0]].residuals)
    alpha, theta = step1["alpha"], step1["theta"]
    betas = [step1["beta0"]]
    for sym in symbols[1:]:
        betas.append(fit_step2(scored[sym].residuals, alpha, theta))
    betas = np.asarray(betas)

    resid = np.column_stack([scored[sym].residuals for sym in symbols])
    sigma_corr = fit_step3(resid, alpha, theta, betas)

    stats = []
    pvals = []
    for j, sym in enumerate(symbols):
        out = ks_test(scored[sym].residuals, alpha, theta, float(betas[j]))
        stats.append(out["statistic"])
        pvals.append(out["pvalue"])

    return FitReport(
        alpha=alpha,
        theta=theta,
        beta=betas,
        sigma_corr=sigma_corr,
        mu=np.array([scored[s].mu for s in symbols]),
        sigma=np.array([scored[s].sigma for s in symbols]),
        ks_stats=np.asarray(stats),
        ks_pvalues=np.asarray(pvals),
        symbols=symbols,
    )
