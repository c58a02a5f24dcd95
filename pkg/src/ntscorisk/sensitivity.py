"""Marginal contributions of asset weights to CoVaR and CoCVaR.

Each route differentiates the standardized risk measure in a single weight
while holding the rest fixed (raw partials, no renormalization onto the
simplex), then lifts to return units with the product rule on
sigma_p * Risk_std - mu_p.  Two interchangeable backends exist:

  * quadrature (``bank=None``): every expectation over (eps0, eps_p, T)
    collapses, conditionally on T, to closed bivariate-normal forms from
    :mod:`ntscorisk.bvn`; only the subordinator integral is numerical.
    Deterministic, and accurate enough to compare against central finite
    differences of the risk measures.
  * sample bank: the same expectations as Monte-Carlo means on a frozen
    :class:`~ntscorisk.simulation.SampleBank` under common random numbers,
    with the joint-event probability substituted by its exact value
    zeta*eta.  Noisy but cheap, and the natural gradient for the
    bank-based optimizer.

Writing k(t) for the standardized CoVaR threshold, v(t) for the index
threshold, rho for the normal-layer correlation and s^2 = 1 - rho^2, the
CoVaR weight derivative follows from the implicit joint-cdf equation:

    d CoVaR_std / d w_j = Gw_j / Gx,
    Gx   = E_T[ phi(k) Phi((v - rho k)/s) / (gamma_p sqrt(T)) ],
    Gw_j = d_beta_j * E_T[ phi(k) Phi((v - rho k)/s) * du_j ]
           + d_rho_j * (rho/s^2 * zeta*eta - E[quad; tail]),

with du_j the within-u derivative of the threshold in beta_p and gamma_p,
and quad the quadratic part of the correlation score of the normal density.

The CoCVaR derivative is the total derivative of the tail expectation: the
inner-parameter term, the correlation-score term, and a boundary term from
the tail threshold moving with w.  On the boundary the integrand equals
-CoVaR_std identically, and the threshold motion is pinned by
differentiating the joint-cdf constraint, which closes the formula without
any new integrals:

    d CoCVaR_std / d w_j =
        -(1/(zeta eta)) J1 * d_beta_j
        + [ (J3 + CoVaR_std * Qbar)/(zeta eta)
            + rho/s^2 * (CoCVaR_std - CoVaR_std) ] * d_rho_j,

    J1   = E[ ((T-1) - eps_p beta_p fac sqrt(T)/gamma_p) ; tail ],
    J3   = E[ quad * Xi_p ; tail ],
    Qbar = E[ quad ; tail ],

with fac = (2-alpha)/(2*theta) and the tail event
{eps_p < k(T), eps0 < v(T)}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import bvn
from .errors import EmptyTail, RhoNearUnity, ZeroDenominator
from .market import (
    MarketModel,
    PortfolioProjection,
    ProjectionGradient,
    project_portfolio,
    projection_gradient,
    u_transform,
    v_transform,
)
from .nts_core import grid_for
from .risk import RiskLevels, cocvar_quadrature, cocvar_std_quadrature, covar, covar_std, std_quantile
from .simulation import SampleBank, chunked_mean, correlate

__all__ = [
    "MctVector",
    "mct_covar_std",
    "mct_cocvar_std",
    "mct_portfolio",
    "mct_finite_difference",
]

_RHO_GUARD = 1.0 - 1e-8
_GX_FLOOR = 1e-12
_PHI_NORM = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class MctVector:
    """Marginal contributions with their ascending ranks.

    Attributes
    ----------
    values : ndarray, shape (N,)
        d Risk / d w_j in per-period return units.
    ranks : ndarray, shape (N,)
        1-based ascending ranks of ``values``; ties break by asset index.
    measure : str
        ``"covar"`` or ``"cocvar"``.
    """

    values: np.ndarray
    ranks: np.ndarray
    measure: str


def _ranks_ascending(values: np.ndarray) -> np.ndarray:
    order = np.lexsort((np.arange(values.size), values))
    ranks = np.empty(values.size, dtype=int)
    ranks[order] = np.arange(1, values.size + 1)
    return ranks


def _check_rho(rho: float) -> None:
    if abs(rho) > _RHO_GUARD:
        raise RhoNearUnity(f"|rho_p| = {abs(rho)!r} leaves the score bounded away from 1")


def _threshold_geometry(proj: PortfolioProjection, levels: RiskLevels, covar_std_value: float, t):
    """Per-t thresholds k(t), v(t) and the within-u threshold derivative."""
    var_std = -std_quantile(proj.sub, proj.beta0, levels.zeta)
    sqrt_t = np.sqrt(t)
    k = u_transform(-covar_std_value, proj, t)
    v = v_transform(-var_std, proj, t)
    fac = proj.sub.t_variance
    du = (1.0 - t) / (proj.gamma_p * sqrt_t) + k * proj.beta_p * fac / proj.gamma_p**2
    return k, v, du, sqrt_t


def mct_covar_std(
    proj: PortfolioProjection,
    grad: ProjectionGradient,
    levels: RiskLevels,
    bank: SampleBank | None,
    covar_std_value: float,
) -> np.ndarray:
    """Weight gradient of the standardized CoVaR.

    Parameters
    ----------
    proj : PortfolioProjection
    grad : ProjectionGradient
    levels : RiskLevels
    bank : SampleBank or None
        None selects the deterministic quadrature backend; a bank selects
        the Monte-Carlo backend on that bank's draws.
    covar_std_value : float
        Standardized CoVaR already solved at these levels.

    Returns
    -------
    ndarray, shape (N,)

    Raises
    ------
    RhoNearUnity
        If |rho_p| > 1 - 1e-8.
    ZeroDenominator
        If the threshold-density denominator falls below 1e-12.
    """
    rho = proj.rho_p
    _check_rho(rho)
    s = np.sqrt(1.0 - rho * rho)
    scale = levels.zeta * levels.eta

    if bank is None:
        grid = grid_for(proj.sub)
        t = grid.t_nodes
        k, v, du, sqrt_t = _threshold_geometry(proj, levels, covar_std_value, t)
        slice_density = _PHI_NORM * np.exp(-0.5 * k * k) * ndtr((v - rho * k) / s)
        gx = grid.expect(slice_density / (proj.gamma_p * sqrt_t))
        boundary = grid.expect(slice_density * du)
        score = grid.expect(bvn.std_bvn_pdf(v, k, rho))
        gw = grad.d_beta * boundary + grad.d_rho * score
    else:
        cb = correlate(bank, rho)
        t = cb.t_draws
        k, v, du, sqrt_t = _threshold_geometry(proj, levels, covar_std_value, t)
        slice_density = _PHI_NORM * np.exp(-0.5 * k * k) * ndtr((v - rho * k) / s)
        gx = chunked_mean(slice_density / (proj.gamma_p * sqrt_t))
        boundary = chunked_mean(slice_density * du)
        hit = (cb.eps_p < k) & (cb.eps0 < v)
        quad = (
            rho * cb.eps0**2
            - (1.0 + rho * rho) * cb.eps0 * cb.eps_p
            + rho * cb.eps_p**2
        ) / (1.0 - rho * rho) ** 2
        qbar = chunked_mean(np.where(hit, quad, 0.0))
        gw = grad.d_beta * boundary + grad.d_rho * (rho / (1.0 - rho * rho) * scale - qbar)

    if abs(gx) < _GX_FLOOR:
        raise ZeroDenominator(f"threshold density {gx!r} too small to divide by")
    return gw / gx


def mct_cocvar_std(
    proj: PortfolioProjection,
    grad: ProjectionGradient,
    levels: RiskLevels,
    bank: SampleBank | None,
    covar_std_value: float,
    cocvar_std_value: float,
) -> np.ndarray:
    """Weight gradient of the standardized CoCVaR (total derivative).

    Parameters
    ----------
    proj, grad, levels, bank
        As in :func:`mct_covar_std`.
    covar_std_value, cocvar_std_value : float
        Standardized risk values already solved at these levels.

    Returns
    -------
    ndarray, shape (N,)

    Raises
    ------
    RhoNearUnity
    EmptyTail
        If the bank backend finds no samples in the joint tail.
    """
    rho = proj.rho_p
    _check_rho(rho)
    s2 = 1.0 - rho * rho
    scale = levels.zeta * levels.eta
    fac = proj.sub.t_variance

    if bank is None:
        grid = grid_for(proj.sub)
        t = grid.t_nodes
        k, v, du, sqrt_t = _threshold_geometry(proj, levels, covar_std_value, t)
        orthant = bvn.std_bvn_cdf(v, k, rho)
        partial_eps = bvn.lower_expect_y(v, k, rho)
        quad_mass = bvn.lower_expect_quad(v, k, rho)
        quad_eps = bvn.lower_expect_quad_y(v, k, rho)
        j1 = grid.expect(
            (t - 1.0) * orthant - (proj.beta_p * fac / proj.gamma_p) * sqrt_t * partial_eps
        )
        qbar = grid.expect(quad_mass)
        j3 = grid.expect(
            proj.beta_p * (t - 1.0) * quad_mass + proj.gamma_p * sqrt_t * quad_eps
        )
    else:
        cb = correlate(bank, rho)
        t = cb.t_draws
        k, v, du, sqrt_t = _threshold_geometry(proj, levels, covar_std_value, t)
        hit = (cb.eps_p < k) & (cb.eps0 < v)
        if not np.any(hit):
            raise EmptyTail("no samples in the joint tail for the CoCVaR gradient")
        quad = (
            rho * cb.eps0**2
            - (1.0 + rho * rho) * cb.eps0 * cb.eps_p
            + rho * cb.eps_p**2
        ) / s2**2
        xi_p = proj.beta_p * (t - 1.0) + cb.eps_p * proj.gamma_p * sqrt_t
        inner = (t - 1.0) - cb.eps_p * proj.beta_p * fac * sqrt_t / proj.gamma_p
        j1 = chunked_mean(np.where(hit, inner, 0.0))
        qbar = chunked_mean(np.where(hit, quad, 0.0))
        j3 = chunked_mean(np.where(hit, quad * xi_p, 0.0))

    rho_term = (j3 + covar_std_value * qbar) / scale + (rho / s2) * (
        cocvar_std_value - covar_std_value
    )
    return -(j1 / scale) * grad.d_beta + rho_term * grad.d_rho


def mct_portfolio(
    model: MarketModel,
    w,
    levels: RiskLevels,
    measure: str,
    bank: SampleBank | None = None,
) -> MctVector:
    """Marginal contributions to portfolio CoVaR or CoCVaR, with ranks.

    Lifts the standardized gradient to return units:

        MCT_j = d sigma_p/d w_j * Risk_std + sigma_p * d Risk_std/d w_j - mu_j.

    Parameters
    ----------
    model : MarketModel
    w : array_like, shape (N,)
    levels : RiskLevels
    measure : str
        ``"covar"`` or ``"cocvar"``.
    bank : SampleBank, optional
        Selects the Monte-Carlo backend for the standardized gradient.

    Returns
    -------
    MctVector
    """
    if measure not in ("covar", "cocvar"):
        raise ValueError(f"unknown measure {measure!r}")
    w = np.asarray(w, dtype=float)
    proj = project_portfolio(model, w)
    grad = projection_gradient(model, w)
    grid = grid_for(proj.sub)
    cv_std = covar_std(proj, levels, grid)

    if measure == "covar":
        risk_std = cv_std
        d_std = mct_covar_std(proj, grad, levels, bank, cv_std)
    else:
        cc_std = cocvar_std_quadrature(proj, levels, cv_std, grid)
        risk_std = cc_std
        d_std = mct_cocvar_std(proj, grad, levels, bank, cv_std, cc_std)

    values = grad.d_sigma * risk_std + proj.sigma_p * d_std - model.mu[1:]
    return MctVector(values=values, ranks=_ranks_ascending(values), measure=measure)


def mct_finite_difference(
    model: MarketModel,
    w,
    levels: RiskLevels,
    measure: str,
    h: float = 1e-4,
) -> np.ndarray:
    """Central-difference probe of the portfolio risk in each weight.

    Perturbs one raw weight at a time without renormalizing, matching the
    unconstrained partial that the analytic routes compute.  Quadrature
    risk only, so the probe is deterministic.

    Parameters
    ----------
    model : MarketModel
    w : array_like, shape (N,)
    levels : RiskLevels
    measure : str
        ``"covar"`` or ``"cocvar"``.
    h : float
        Step size, in [1e-6, 1e-3].

    Returns
    -------
    ndarray, shape (N,)
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError(f"step {h!r} outside [1e-6, 1e-3]")
    if measure == "covar":
        risk = lambda x: covar(model, x, levels)
    elif measure == "cocvar":
        risk = lambda x: cocvar_quadrature(model, x, levels)
    else:
        raise ValueError(f"unknown measure {measure!r}")
    w = np.asarray(w, dtype=float)
    out = np.empty(w.size)
    for j in range(w.size):
        wp = w.copy()
        wp[j] = w[j] + h
        wm = w.copy()
        wm[j] = w[j] - h
        out[j] = (risk(wp) - risk(wm)) / (2.0 * h)
    return out
