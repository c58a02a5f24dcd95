"""Market model with an index at slot 0 and its portfolio projection.

An (N+1)-dimensional market holds per-period expected returns mu, return
volatilities sigma, and a joint standardized NTS law for the residual
vector.  Slot 0 is the index; slots 1..N are the investable assets.  A
long-only weight vector w collapses the assets to a single portfolio
return whose standardized residual, paired with the index residual, again
follows a two-dimensional NTS law.  :func:`project_portfolio` computes the
five parameters of that pair and :func:`projection_gradient` their exact
derivatives in w, which the sensitivity and optimization layers consume.

Projection formulas, with fac = (2-alpha)/(2*theta) the subordinator
variance and A_{nm} = sigma_n sigma_m (gamma_n gamma_m rho_{nm}
+ beta_n beta_m fac) the residual covariance scaled to returns:

    mu_p    = sum_n w_n mu_n
    sigma_p = sqrt(w' A w)
    beta_p  = sum_n w_n sigma_n beta_n / sigma_p
    gamma_p = sqrt(1 - beta_p^2 fac)
    rho_p   = sum_n w_n gamma_n sigma_n rho_{0,n}
              / sqrt(sum_{n,m} w_n w_m gamma_n gamma_m sigma_n sigma_m rho_{nm})

The denominator of rho_p equals sigma_p*gamma_p identically, which pins
|rho_p| <= 1 by Cauchy-Schwarz.

Weight validation is strict only at external boundaries: the numerical
kernels accept any nonnegative weight vector with sigma_p > 0 so that
finite-difference probes of the projection remain well defined off the
simplex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegeneratePortfolio, ShortPosition, WeightsError
from .nts_core import StdNtsParams, SubordinatorParams, gamma_from_beta

__all__ = [
    "MarketModel",
    "PortfolioProjection",
    "ProjectionGradient",
    "validate_weights",
    "project_portfolio",
    "projection_gradient",
    "u_transform",
    "v_transform",
    "model_to_dict",
    "model_from_dict",
    "read_model",
    "write_model",
]

_SIGMA_P_FLOOR = 1e-14
_WEIGHT_SUM_TOL = 1e-12
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MarketModel:
    """Joint return model: index at slot 0, N assets at slots 1..N.

    Attributes
    ----------
    mu : ndarray, shape (N+1,)
        Per-period expected returns.
    sigma : ndarray, shape (N+1,)
        Positive return volatilities.
    nts : StdNtsParams
        Joint standardized residual law of dimension N+1.
    """

    mu: np.ndarray
    sigma: np.ndarray
    nts: StdNtsParams

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if mu.ndim != 1 or mu.shape != sigma.shape:
            raise ValueError("mu and sigma must be vectors of equal length")
        if mu.size != self.nts.dim:
            raise ValueError(
                f"model dimension mismatch: {mu.size} returns vs "
                f"{self.nts.dim}-dimensional residual law"
            )
        if mu.size < 2:
            raise ValueError("model needs an index and at least one asset")
        if not np.all(sigma > 0.0):
            raise ValueError("volatilities must be positive")

    @property
    def n_assets(self) -> int:
        """Number of investable assets N (excluding the index)."""
        return self.mu.size - 1


@dataclass(frozen=True)
class PortfolioProjection:
    """Two-dimensional standardized NTS parameters of (index, portfolio).

    Attributes
    ----------
    mu_p, sigma_p, beta_p, gamma_p : float
        Portfolio return mean, volatility, skew and scale parameters.
    rho_p : float
        Normal-layer correlation between index and portfolio residuals.
    mu0, sigma0, beta0, gamma0 : float
        The same marginals for the index.
    sub : SubordinatorParams
        Shared subordinator parameters.
    """

    mu_p: float
    sigma_p: float
    beta_p: float
    gamma_p: float
    rho_p: float
    mu0: float
    sigma0: float
    beta0: float
    gamma0: float
    sub: SubordinatorParams


@dataclass(frozen=True)
class ProjectionGradient:
    """Derivatives of the projection fields in the asset weights.

    Attributes
    ----------
    d_sigma, d_beta, d_gamma, d_rho : ndarray, shape (N,)
        Partial derivatives of sigma_p, beta_p, gamma_p, rho_p in w_j.
    """

    d_sigma: np.ndarray
    d_beta: np.ndarray
    d_gamma: np.ndarray
    d_rho: np.ndarray


def validate_weights(w, n_assets: int | None = None) -> np.ndarray:
    """Check a long-only simplex weight vector and return it as an array.

    Parameters
    ----------
    w : array_like
        Candidate weights.
    n_assets : int, optional
        Required length; checked when given.

    Returns
    -------
    ndarray
        The validated weight vector.

    Raises
    ------
    ShortPosition
        If any weight is negative.
    WeightsError
        If the vector is malformed or does not sum to 1 within 1e-12.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise WeightsError("weights must form a nonempty vector")
    if n_assets is not None and w.size != n_assets:
        raise WeightsError(f"expected {n_assets} weights, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise WeightsError("weights must be finite")
    if np.any(w < 0.0):
        raise ShortPosition(f"long-only portfolio, got min weight {w.min():.3e}")
    total = float(np.sum(w))
    if abs(total - 1.0) > _WEIGHT_SUM_TOL:
        raise WeightsError(f"weights must sum to 1, got {total!r}")
    return w


def _asset_cov(model: MarketModel) -> np.ndarray:
    """Return covariance matrix A of the asset block, scaled by sigma."""
    nts = model.nts
    fac = nts.sub.t_variance
    beta = nts.beta[1:]
    gamma = nts.gamma[1:]
    sig = model.sigma[1:]
    corr = nts.sigma_corr[1:, 1:]
    resid_cov = np.outer(gamma, gamma) * corr + np.outer(beta, beta) * fac
    return np.outer(sig, sig) * resid_cov


def project_portfolio(model: MarketModel, w) -> PortfolioProjection:
    """Collapse asset weights to the bivariate (index, portfolio) law.

    Accepts any nonnegative weight vector with positive portfolio
    volatility; simplex validation belongs to the caller's boundary.

    Parameters
    ----------
    model : MarketModel
    w : array_like, shape (N,)
        Asset weights.

    Returns
    -------
    PortfolioProjection

    Raises
    ------
    DegeneratePortfolio
        If sigma_p(w) falls below 1e-14.
    """
    w = np.asarray(w, dtype=float)
    nts = model.nts
    sig = model.sigma[1:]
    beta = nts.beta[1:]
    gamma = nts.gamma[1:]
    rho0 = nts.sigma_corr[0, 1:]
    corr = nts.sigma_corr[1:, 1:]

    a = _asset_cov(model)
    var_p = float(w @ a @ w)
    if var_p <= _SIGMA_P_FLOOR**2:
        raise DegeneratePortfolio(f"sigma_p^2 = {var_p!r} is numerically zero")
    sigma_p = float(np.sqrt(var_p))
    mu_p = float(w @ model.mu[1:])
    beta_p = float(w @ (sig * beta)) / sigma_p
    gamma_p = float(gamma_from_beta(nts.sub, beta_p))

    gs = gamma * sig
    denom = float(np.sqrt((w * gs) @ corr @ (w * gs)))
    rho_p = float(np.clip(w @ (gs * rho0) / denom, -1.0, 1.0))

    return PortfolioProjection(
        mu_p=mu_p,
        sigma_p=sigma_p,
        beta_p=beta_p,
        gamma_p=gamma_p,
        rho_p=rho_p,
        mu0=float(model.mu[0]),
        sigma0=float(model.sigma[0]),
        beta0=float(nts.beta[0]),
        gamma0=float(nts.gamma[0]),
        sub=nts.sub,
    )


def projection_gradient(model: MarketModel, w) -> ProjectionGradient:
    """Exact weight derivatives of the portfolio projection.

    With Aw the covariance-weighted position vector, the chain rules are

        d sigma_p / d w_j = (Aw)_j / sigma_p
        d beta_p  / d w_j = sigma_j beta_j / sigma_p - beta_p (Aw)_j / sigma_p^2
        d gamma_p / d w_j = -(beta_p fac / gamma_p) d beta_p / d w_j
        d rho_p   / d w_j = gamma_j sigma_j rho_{0,j} / D - rho_p (S w)_j / D^2

    where D = sigma_p gamma_p, S is the normal-layer covariance block and
    fac = (2-alpha)/(2*theta).

    Parameters
    ----------
    model : MarketModel
    w : array_like, shape (N,)

    Returns
    -------
    ProjectionGradient
    """
    w = np.asarray(w, dtype=float)
    proj = project_portfolio(model, w)
    nts = model.nts
    fac = nts.sub.t_variance
    sig = model.sigma[1:]
    beta = nts.beta[1:]
    gamma = nts.gamma[1:]
    rho0 = nts.sigma_corr[0, 1:]
    corr = nts.sigma_corr[1:, 1:]

    aw = _asset_cov(model) @ w
    d_sigma = aw / proj.sigma_p
    d_beta = sig * beta / proj.sigma_p - proj.beta_p * aw / proj.sigma_p**2
    d_gamma = -(proj.beta_p * fac / proj.gamma_p) * d_beta

    gs = gamma * sig
    d_big = proj.sigma_p * proj.gamma_p
    sw = gs * (corr @ (w * gs))
    d_rho = gs * rho0 / d_big - proj.rho_p * sw / d_big**2

    return ProjectionGradient(d_sigma=d_sigma, d_beta=d_beta, d_gamma=d_gamma, d_rho=d_rho)


def u_transform(x, proj: PortfolioProjection, t):
    """Standardize a portfolio residual value at subordinator level t.

    u(x, t) = (x - beta_p (t-1)) / (gamma_p sqrt(t)); the conditional law
    of the portfolio residual given T = t is u^{-1} of a standard normal.
    """
    t = np.asarray(t, dtype=float)
    return (x - proj.beta_p * (t - 1.0)) / (proj.gamma_p * np.sqrt(t))


def v_transform(v0: float, proj: PortfolioProjection, t):
    """Standardize an index residual value at subordinator level t.

    v(t) = (v0 - beta0 (t-1)) / (gamma0 sqrt(t)).
    """
    t = np.asarray(t, dtype=float)
    return (v0 - proj.beta0 * (t - 1.0)) / (proj.gamma0 * np.sqrt(t))


def model_to_dict(model: MarketModel, symbols: list[str] | None = None) -> dict:
    """Serialize a model to the documented JSON structure.

    The document carries {schema_version, mu, sigma, alpha, theta, beta,
    Sigma} with Sigma flattened row-major over the (N+1) x (N+1) normal
    correlation matrix, plus an optional symbols list (index first).
    """
    doc = {
        "schema_version": SCHEMA_VERSION,
        "mu": [float(x) for x in model.mu],
        "sigma": [float(x) for x in model.sigma],
        "alpha": model.nts.sub.alpha,
        "theta": model.nts.sub.theta,
        "beta": [float(x) for x in model.nts.beta],
        "Sigma": [float(x) for x in model.nts.sigma_corr.ravel(order="C")],
    }
    if symbols is not None:
        if len(symbols) != model.mu.size:
            raise ValueError("symbols length must match model dimension")
        doc["symbols"] = list(symbols)
    return doc


def model_from_dict(doc: dict) -> tuple[MarketModel, list[str] | None]:
    """Build a model from its JSON structure; inverse of model_to_dict.

    Raises
    ------
    ValueError
        On missing fields, length mismatches, or parameter violations.
    """
    try:
        mu = np.asarray(doc["mu"], dtype=float)
        sigma = np.asarray(doc["sigma"], dtype=float)
        alpha = float(doc["alpha"])
        theta = float(doc["theta"])
        beta = np.asarray(doc["beta"], dtype=float)
        flat = np.asarray(doc["Sigma"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"model document missing field {exc.args[0]!r}") from exc
    dim = mu.size
    if flat.size != dim * dim:
        raise ValueError(
            f"Sigma must hold {dim * dim} row-major entries, got {flat.size}"
        )
    nts = StdNtsParams(
        sub=SubordinatorParams(alpha=alpha, theta=theta),
        beta=beta,
        sigma_corr=flat.reshape(dim, dim),
    )
    model = MarketModel(mu=mu, sigma=sigma, nts=nts)
    symbols = doc.get("symbols")
    if symbols is not None:
        symbols = [str(s) for s in symbols]
        if len(symbols) != dim:
            raise ValueError("symbols length must match model dimension")
    return model, symbols


def read_model(path) -> tuple[MarketModel, list[str] | None]:
    """Load a model JSON document from ``path``."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("model document must be a JSON object")
    return model_from_dict(doc)


def write_model(path, model: MarketModel, symbols: list[str] | None = None) -> None:
    """Write a model JSON document to ``path``."""
    doc = model_to_dict(model, symbols)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
