"""Index VaR, conditional VaR of a portfolio, and its tail expectation.

All measures use the loss-positive convention: a positive number is a loss.
For distress level zeta and portfolio level eta,

  * ``var_std_index`` solves F_{Xi0}(-VaR) = zeta on the standardized index
    residual; return units follow by sigma0 * VaR_std - mu0.
  * ``covar`` solves the implicit equation
    F_{(Xi0, Xip)}(-VaR_zeta(Xi0), -CoVaR) = zeta * eta, where the joint cdf
    is the subordinator mixture of bivariate normal orthants; the root-find
    runs on the quadrature cdf regardless of the report method tag.
  * ``cocvar_quadrature`` evaluates the tail expectation
    -(1/(zeta eta)) E[Xi_p ; Xi_p < -CoVaR, Xi_0 < -VaR] by reducing the
    inner normal integrals to closed forms per subordinator node.
  * ``cocvar_mcs`` estimates the same expectation on a frozen sample bank
    with common random numbers.

The Gaussian baseline ``gaussian_covar_cocvar`` computes both conditional
measures for a bivariate normal return pair using only generic quadrature
and root-finding on the multivariate normal cdf; it shares no code with the
mixture path, so the two can check each other in the near-Gaussian regime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import dblquad
from scipy.optimize import brentq
from scipy.special import ndtri
from scipy.stats import multivariate_normal, norm

from . import bvn
from .errors import EmptyTail, InversionNotConverged, RootNotBracketed, SingularCovariance
from .market import MarketModel, PortfolioProjection, project_portfolio, u_transform, v_transform
from .nts_core import SubordinatorGrid, SubordinatorParams, grid_for, stdnts_marginal_cdf
from .simulation import SampleBank, chunked_mean, correlate

__all__ = [
    "RiskLevels",
    "RiskReport",
    "McsEstimate",
    "var_std_index",
    "var_index",
    "std_quantile",
    "bivariate_std_cdf",
    "covar_std",
    "covar",
    "cocvar_std_quadrature",
    "cocvar_quadrature",
    "cocvar_mcs",
    "gaussian_covar_cocvar",
    "compute_risk_report",
]

_RESIDUAL_TOL = 1e-10
_BRACKET_LIMIT = 60.0

#: Solved standardized quantiles keyed by (alpha, theta, beta, q); the
#: index quantile is re-requested on every risk evaluation of a weight
#: sweep, so memoizing it removes a root-find from the inner loop.
_QUANTILE_CACHE: dict[tuple[float, float, float, float], float] = {}


@dataclass(frozen=True)
class RiskLevels:
    """Distress level of the index and loss level of the portfolio.

    Attributes
    ----------
    zeta : float
        Index distress probability, in (0, 1).
    eta : float
        Portfolio loss probability conditional on distress, in (0, 1).
    """

    zeta: float
    eta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.zeta < 1.0 and 0.0 < self.eta < 1.0):
            raise ValueError(
                f"levels must lie in (0, 1), got zeta={self.zeta!r} eta={self.eta!r}"
            )


@dataclass(frozen=True)
class McsEstimate:
    """Monte-Carlo estimate with its standard error.

    Attributes
    ----------
    value : float
        Point estimate in return units.
    stderr : float
        Standard error of the estimate.
    """

    value: float
    stderr: float


@dataclass(frozen=True)
class RiskReport:
    """Bundle of the three risk numbers at one (zeta, eta) pair.

    ``cocvar_quadrature`` is populated when the report method is ``mcs`` so
    that both estimates of the tail expectation travel together.

    Attributes
    ----------
    zeta, eta : float
        Levels the report was computed at.
    var_index, covar, cocvar : float
        Loss-positive risk numbers in return units.
    method : str
        ``"quadrature"`` or ``"mcs"``; tags the cocvar estimator.
    M : int or None
        Sample size when method is ``mcs``.
    stderr : float or None
        Standard error of the MCS cocvar.
    cocvar_quadrature : float or None
        Deterministic cocvar accompanying an MCS report.
    """

    zeta: float
    eta: float
    var_index: float
    covar: float
    cocvar: float
    method: str
    M: int | None = None
    stderr: float | None = None
    cocvar_quadrature: float | None = None

    def __post_init__(self) -> None:
        for name in ("var_index", "covar", "cocvar"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        slack = 1e-6 * abs(self.covar) + 3.0 * (self.stderr or 0.0)
        if self.cocvar < self.covar - slack:
            raise ValueError(
                f"tail expectation {self.cocvar!r} below its quantile {self.covar!r}"
            )

    def to_dict(self) -> dict:
        doc = {
            "zeta": self.zeta,
            "eta": self.eta,
            "var_index": self.var_index,
            "covar": self.covar,
            "cocvar": self.cocvar,
            "method": self.method,
        }
        for name in ("M", "stderr", "cocvar_quadrature"):
            value = getattr(self, name)
            if value is not None:
                doc[name] = value
        return doc


def _expand_bracket(f, center: float, step: float = 0.5):
    """Grow [center-d, center+d] geometrically until f changes sign.

    Expects f increasing; gives up once d exceeds the 60-sigma guard.
    """
    d = step
    while d <= _BRACKET_LIMIT:
        lo, hi = center - d, center + d
        if f(lo) < 0.0 < f(hi):
            return lo, hi
        d *= 2.0
    raise RootNotBracketed(
        f"no sign change within {_BRACKET_LIMIT} units of {center!r}"
    )


def std_quantile(p: SubordinatorParams, beta: float, q: float) -> float:
    """Quantile of a standardized NTS marginal by bracketing plus Brent.

    Parameters
    ----------
    p : SubordinatorParams
    beta : float
        Marginal skew parameter.
    q : float
        Probability in (0, 1).

    Returns
    -------
    float
        x with F(x) = q, residual below 1e-10.
    """
    key = (p.alpha, p.theta, float(beta), float(q))
    cached = _QUANTILE_CACHE.get(key)
    if cached is not None:
        return cached

    def f(x: float) -> float:
        return stdnts_marginal_cdf(x, p, beta) - q

    lo, hi = _expand_bracket(f, float(ndtri(q)))
    root = brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16)
    if abs(f(root)) > _RESIDUAL_TOL:
        raise InversionNotConverged(
            f"quantile residual {f(root):.2e} above {_RESIDUAL_TOL}"
        )
    _QUANTILE_CACHE[key] = float(root)
    return float(root)


def var_std_index(model: MarketModel, zeta: float) -> float:
    """Standardized index VaR: -F_{Xi0}^{-1}(zeta), loss positive."""
    return -std_quantile(model.nts.sub, float(model.nts.beta[0]), zeta)


def var_index(model: MarketModel, zeta: float) -> float:
    """Index VaR in return units: sigma0 * VaR_std - mu0."""
    return float(model.sigma[0]) * var_std_index(model, zeta) - float(model.mu[0])


def bivariate_std_cdf(
    xi0: float,
    xip: float,
    proj: PortfolioProjection,
    grid: SubordinatorGrid | None = None,
) -> float:
    """Joint cdf of the standardized (index, portfolio) pair.

    Mixture representation: conditionally on the subordinator T = t the
    pair is bivariate normal after the u/v standardizations, so the cdf is
    the T-expectation of bivariate normal orthant probabilities.

    Parameters
    ----------
    xi0, xip : float
        Evaluation point.
    proj : PortfolioProjection
    grid : SubordinatorGrid, optional
        Precomputed subordinator grid; built on demand otherwise.

    Returns
    -------
    float
        Probability in [0, 1].
    """
    if grid is None:
        grid = grid_for(proj.sub)
    t = grid.t_nodes
    h = v_transform(xi0, proj, t)
    k = u_transform(xip, proj, t)
    val = grid.expect(bvn.std_bvn_cdf(h, k, proj.rho_p))
    return float(np.clip(val, 0.0, 1.0))


def _gaussian_covar_seed(rho: float, levels: RiskLevels) -> float:
    """Standardized Gaussian CoVaR used to center the root bracket."""
    h0 = float(ndtri(levels.zeta))
    target = levels.zeta * levels.eta

    def f(x: float) -> float:
        return bvn.std_bvn_cdf(h0, x, rho) - target

    lo, hi = _expand_bracket(f, float(ndtri(levels.eta)))
    return float(brentq(f, lo, hi, xtol=1e-10))


def covar_std(
    proj: PortfolioProjection,
    levels: RiskLevels,
    grid: SubordinatorGrid | None = None,
    var_std: float | None = None,
    hint: float | None = None,
) -> float:
    """Standardized CoVaR of the portfolio given index distress.

    Solves F_{(Xi0, Xip)}(-VaR_zeta, x) = zeta*eta for x on the quadrature
    cdf and returns -x, so the result is loss positive.

    Parameters
    ----------
    proj : PortfolioProjection
    levels : RiskLevels
    grid : SubordinatorGrid, optional
    var_std : float, optional
        Precomputed standardized index VaR; solved on demand otherwise.
    hint : float, optional
        Loss-positive CoVaR of a nearby projection.  Centers the bracket
        there with a narrow initial window, which saves most of the cdf
        evaluations when solving along a path of slowly varying weights.
        A stale hint only costs extra expansion steps.

    Returns
    -------
    float
    """
    if grid is None:
        grid = grid_for(proj.sub)
    if var_std is None:
        var_std = -std_quantile(proj.sub, proj.beta0, levels.zeta)
    v0 = -var_std
    target = levels.zeta * levels.eta

    def f(x: float) -> float:
        return bivariate_std_cdf(v0, x, proj, grid) - target

    if hint is not None:
        lo, hi = _expand_bracket(f, -hint, step=0.05)
    else:
        lo, hi = _expand_bracket(f, _gaussian_covar_seed(proj.rho_p, levels))
    root = brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16)
    if abs(f(root)) > _RESIDUAL_TOL:
        raise InversionNotConverged(
            f"implicit-equation residual {f(root):.2e} above {_RESIDUAL_TOL}"
        )
    return -float(root)


def covar(model: MarketModel, w, levels: RiskLevels, method: str = "quadrature") -> float:
    """Portfolio CoVaR in return units: sigma_p * CoVaR_std - mu_p.

    The implicit equation is always solved on the quadrature cdf; the
    ``method`` tag exists so report-level callers can pass their estimator
    choice through without changing the root-find.
    """
    del method
    proj = project_portfolio(model, w)
    return proj.sigma_p * covar_std(proj, levels) - proj.mu_p


def cocvar_std_quadrature(
    proj: PortfolioProjection,
    levels: RiskLevels,
    covar_std_value: float | None = None,
    grid: SubordinatorGrid | None = None,
) -> float:
    """Standardized CoCVaR by subordinator quadrature.

    Conditional on T = t, the tail expectation of
    Xi_p = beta_p (T-1) + eps_p gamma_p sqrt(T) over the joint event
    {Xi_p < -CoVaR, Xi_0 < -VaR} reduces to the orthant probability and the
    partial expectation of eps_p, both closed forms; only the T-integral is
    numerical.

    Parameters
    ----------
    proj : PortfolioProjection
    levels : RiskLevels
    covar_std_value : float, optional
        Standardized CoVaR; solved on demand otherwise.
    grid : SubordinatorGrid, optional

    Returns
    -------
    float
        Loss-positive standardized CoCVaR.
    """
    if grid is None:
        grid = grid_for(proj.sub)
    if covar_std_value is None:
        covar_std_value = covar_std(proj, levels, grid)
    var_std = -std_quantile(proj.sub, proj.beta0, levels.zeta)

    t = grid.t_nodes
    h = v_transform(-var_std, proj, t)
    k = u_transform(-covar_std_value, proj, t)
    orthant = bvn.std_bvn_cdf(h, k, proj.rho_p)
    partial_eps = bvn.lower_expect_y(h, k, proj.rho_p)
    inner = proj.beta_p * (t - 1.0) * orthant + proj.gamma_p * np.sqrt(t) * partial_eps
    return -float(grid.expect(inner)) / (levels.zeta * levels.eta)


def cocvar_quadrature(model: MarketModel, w, levels: RiskLevels) -> float:
    """Portfolio CoCVaR in return units by quadrature."""
    proj = project_portfolio(model, w)
    return proj.sigma_p * cocvar_std_quadrature(proj, levels) - proj.mu_p


def cocvar_mcs(model: MarketModel, w, levels: RiskLevels, bank: SampleBank) -> McsEstimate:
    """Portfolio CoCVaR estimated on a frozen sample bank.

    The bank's normal pair is rotated to the projection correlation; the
    estimator averages Xi_p over the joint tail event defined by the
    quadrature CoVaR and index VaR, so the only randomness is the bank's.

    Parameters
    ----------
    model : MarketModel
    w : array_like
        Asset weights.
    levels : RiskLevels
    bank : SampleBank
        Must be drawn with the model's subordinator parameters.

    Returns
    -------
    McsEstimate
        Value and standard error in return units.

    Raises
    ------
    EmptyTail
        If no sample lands in the joint tail event.
    """
    proj = project_portfolio(model, w)
    grid = grid_for(proj.sub)
    var_std = -std_quantile(proj.sub, proj.beta0, levels.zeta)
    cv_std = covar_std(proj, levels, grid, var_std)

    cb = correlate(bank, proj.rho_p)
    t = cb.t_draws
    sqrt_t = np.sqrt(t)
    hit = (cb.eps_p < u_transform(-cv_std, proj, t)) & (
        cb.eps0 < v_transform(-var_std, proj, t)
    )
    if not np.any(hit):
        raise EmptyTail(
            f"no samples in the joint tail at zeta*eta = {levels.zeta * levels.eta!r}"
        )
    xi_p = proj.beta_p * (t - 1.0) + cb.eps_p * proj.gamma_p * sqrt_t
    summand = np.where(hit, xi_p, 0.0)

    scale = levels.zeta * levels.eta
    mean = chunked_mean(summand)
    mean_sq = chunked_mean(summand * summand)
    m = bank.M
    var = max(0.0, (mean_sq - mean * mean)) * m / max(1, m - 1)
    value = -proj.mu_p - proj.sigma_p * mean / scale
    stderr = proj.sigma_p * np.sqrt(var / m) / scale
    return McsEstimate(value=float(value), stderr=float(stderr))


def gaussian_covar_cocvar(mu2, sigma2, levels: RiskLevels) -> dict:
    """Conditional risk of a bivariate normal return pair (index, portfolio).

    Root-finds CoVaR on the multivariate normal cdf and evaluates CoCVaR by
    two-dimensional tail quadrature.  Deliberately built on generic routines
    only, so it is an independent baseline for the mixture path in the
    near-Gaussian regime.

    Parameters
    ----------
    mu2 : array_like, shape (2,)
        Means of (index, portfolio) returns.
    sigma2 : array_like, shape (2, 2)
        Positive definite covariance.
    levels : RiskLevels

    Returns
    -------
    dict
        {"var_index", "covar", "cocvar"}, loss positive.

    Raises
    ------
    SingularCovariance
        If sigma2 is not symmetric positive definite.
    """
    mu2 = np.asarray(mu2, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if sigma2.shape != (2, 2) or not np.allclose(sigma2, sigma2.T, atol=1e-12):
        raise SingularCovariance("need a symmetric 2x2 covariance")
    if np.linalg.det(sigma2) <= 0.0 or sigma2[0, 0] <= 0.0:
        raise SingularCovariance("covariance must be positive definite")

    s0 = float(np.sqrt(sigma2[0, 0]))
    sp = float(np.sqrt(sigma2[1, 1]))
    mvn = multivariate_normal(mean=mu2, cov=sigma2)
    x0 = float(mu2[0] + s0 * ndtri(levels.zeta))
    target = levels.zeta * levels.eta

    def f(x: float) -> float:
        return float(mvn.cdf(np.array([x0, x]))) - target

    center = float(mu2[1] + sp * ndtri(levels.eta))
    d = 0.5 * sp
    while d <= _BRACKET_LIMIT * sp:
        if f(center - d) < 0.0 < f(center + d):
            break
        d *= 2.0
    else:
        raise RootNotBracketed("gaussian covar bracket failed")
    xp = float(brentq(f, center - d, center + d, xtol=1e-12 * max(1.0, sp)))

    dens = multivariate_normal(mean=mu2, cov=sigma2)

    def integrand(x1: float, x0v: float) -> float:
        return x1 * float(dens.pdf(np.array([x0v, x1])))

    lo0 = float(mu2[0] - 12.0 * s0)
    lo1 = float(mu2[1] - 12.0 * sp)
    tail, _ = dblquad(integrand, lo0, x0, lo1, xp, epsabs=1e-12, epsrel=1e-9)
    return {
        "var_index": -x0,
        "covar": -xp,
        "cocvar": -tail / target,
    }


def compute_risk_report(
    model: MarketModel,
    w,
    levels: RiskLevels,
    method: str = "quadrature",
    bank: SampleBank | None = None,
) -> RiskReport:
    """Assemble the three risk numbers into a :class:`RiskReport`.

    With ``method="mcs"`` the cocvar slot holds the bank estimate and the
    deterministic value rides along in ``cocvar_quadrature``.

    Parameters
    ----------
    model : MarketModel
    w : array_like
    levels : RiskLevels
    method : str
        ``"quadrature"`` (default) or ``"mcs"``.
    bank : SampleBank, optional
        Required when method is ``"mcs"``.

    Returns
    -------
    RiskReport
    """
    if method not in ("quadrature", "mcs"):
        raise ValueError(f"unknown method {method!r}")
    proj = project_portfolio(model, w)
    grid = grid_for(proj.sub)
    var_std = -std_quantile(proj.sub, proj.beta0, levels.zeta)
    cv_std = covar_std(proj, levels, grid, var_std)
    cc_quad = proj.sigma_p * cocvar_std_quadrature(proj, levels, cv_std, grid) - proj.mu_p
    var_r = proj.sigma0 * var_std - proj.mu0
    covar_r = proj.sigma_p * cv_std - proj.mu_p

    if method == "quadrature":
        return RiskReport(
            zeta=levels.zeta,
            eta=levels.eta,
            var_index=var_r,
            covar=covar_r,
            cocvar=cc_quad,
            method=method,
        )
    if bank is None:
        raise ValueError("method 'mcs' needs a sample bank")
    est = cocvar_mcs(model, w, levels, bank)
    return RiskReport(
        zeta=levels.zeta,
        eta=levels.eta,
        var_index=var_r,
        covar=covar_r,
        cocvar=est.value,
        method=method,
        M=bank.M,
        stderr=est.stderr,
        cocvar_quadrature=cc_quad,
    )
