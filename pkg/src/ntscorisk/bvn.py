"""Closed-form bivariate normal tail quantities.

Everything in this module concerns a standard bivariate normal pair (X, Y)
with correlation rho and the lower-orthant event {X < h, Y < k}.  The
conditional risk formulas and their weight derivatives reduce, at each
subordinator value, to four quantities over that event: its probability,
the density at the corner, the partial expectation of Y, and expectations
involving the correlation score of the density.  All four have closed forms
in the univariate normal cdf and Owen's T function, which keeps the outer
quadrature over the subordinator cheap and smooth.

The orthant probability uses the classical Owen decomposition

    Phi2(h, k; rho) = (Phi(h) + Phi(k))/2 - T(h, a_h) - T(k, a_k) - delta,

with a_h = (k - rho*h)/(h*sqrt(1-rho^2)), a_k symmetric, and delta = 1/2
exactly when hk < 0 or (hk = 0 and h + k < 0).  Degenerate arguments
(zeros, infinities, |rho| -> 1) are mapped to their limits explicitly.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, owens_t

__all__ = [
    "std_bvn_cdf",
    "std_bvn_pdf",
    "lower_expect_y",
    "lower_expect_quad",
    "lower_expect_quad_y",
]

_RHO_ONE = 1.0 - 1e-15
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _phi(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def _owen_term(x, other, rho: float, s: float):
    """Owen's T(x, (other - rho*x)/(x*s)) with the x -> 0 limit filled in."""
    x = np.asarray(x, dtype=float)
    other = np.asarray(other, dtype=float)
    num = other - rho * x
    at_zero = x == 0.0
    # The ratio may overflow to +/-inf for tiny x; owens_t handles the
    # infinite-slope limit, so only the warning needs suppressing.
    with np.errstate(over="ignore", divide="ignore"):
        a = np.divide(num, x * s, out=np.zeros_like(num), where=~at_zero)
    t = owens_t(x, a)
    # T(0, +/-inf) = +/-1/4; the sign follows the numerator.
    return np.where(at_zero, 0.25 * np.sign(other), t)


def std_bvn_cdf(h, k, rho: float):
    """Lower-orthant probability P(X < h, Y < k) for correlation ``rho``.

    Parameters
    ----------
    h, k : array_like
        Orthant corners; infinities are allowed.
    rho : float
        Correlation, -1 <= rho <= 1.

    Returns
    -------
    ndarray or float
        Probabilities in [0, 1], broadcast over ``h`` and ``k``.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    scalar = h.ndim == 0 and k.ndim == 0
    h, k = np.broadcast_arrays(h, k)

    if rho >= _RHO_ONE:
        out = ndtr(np.minimum(h, k))
        return float(out) if scalar else out
    if rho <= -_RHO_ONE:
        out = np.maximum(0.0, ndtr(h) + ndtr(k) - 1.0)
        return float(out) if scalar else out

    s = float(np.sqrt(1.0 - rho * rho))
    finite = np.isfinite(h) & np.isfinite(k)
    hs = np.where(finite, h, 0.0)
    ks = np.where(finite, k, 0.0)

    both_zero = (hs == 0.0) & (ks == 0.0)
    delta = np.where((hs * ks < 0.0) | ((hs * ks == 0.0) & (hs + ks < 0.0)), 0.5, 0.0)
    core = (
        0.5 * (ndtr(hs) + ndtr(ks))
        - _owen_term(hs, ks, rho, s)
        - _owen_term(ks, hs, rho, s)
        - delta
    )
    core = np.where(both_zero, 0.25 + np.arcsin(rho) / (2.0 * np.pi), core)

    # Infinite corners collapse to marginals (or zero for -inf).
    core = np.where(h == np.inf, ndtr(k), core)
    core = np.where(k == np.inf, ndtr(h), core)
    core = np.where((h == -np.inf) | (k == -np.inf), 0.0, core)

    out = np.clip(core, 0.0, 1.0)
    return float(out) if scalar else out


def std_bvn_pdf(h, k, rho: float):
    """Standard bivariate normal density at (h, k) for correlation ``rho``."""
    s2 = 1.0 - rho * rho
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    q = (np.square(h) - 2.0 * rho * h * k + np.square(k)) / s2
    out = np.exp(-0.5 * q) / (2.0 * np.pi * np.sqrt(s2))
    return float(out) if out.ndim == 0 else out


def lower_expect_y(h, k, rho: float):
    """Partial expectation E[Y ; X < h, Y < k].

    Closed form: -phi(k)*Phi((h - rho*k)/s) - rho*phi(h)*Phi((k - rho*h)/s)
    with s = sqrt(1 - rho^2).
    """
    s = np.sqrt(1.0 - rho * rho)
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    out = -_phi(k) * ndtr((h - rho * k) / s) - rho * _phi(h) * ndtr((k - rho * h) / s)
    return float(out) if out.ndim == 0 else out


def lower_expect_quad(h, k, rho: float):
    """Partial expectation of the correlation score's quadratic part.

    With quad(x, y) = (rho*x^2 - (1+rho^2)*x*y + rho*y^2)/(1-rho^2)^2, the
    derivative of the density in rho is phi2*(rho/(1-rho^2) - quad), and
    differentiating the orthant probability in rho gives

        E[quad ; X < h, Y < k] = rho/(1-rho^2) * Phi2(h, k; rho)
                                 - phi2(h, k; rho).
    """
    s2 = 1.0 - rho * rho
    return (rho / s2) * std_bvn_cdf(h, k, rho) - std_bvn_pdf(h, k, rho)


def lower_expect_quad_y(h, k, rho: float):
    """Partial expectation E[quad * Y ; X < h, Y < k].

    Differentiating the closed form of :func:`lower_expect_y` in rho and
    using phi(k)*phi((h-rho*k)/s) = s*phi2(h,k;rho) collapses the result to

        rho/(1-rho^2) * E[Y; .] - k*phi2(h,k;rho) + phi(h)*Phi((k-rho*h)/s).
    """
    s2 = 1.0 - rho * rho
    s = np.sqrt(s2)
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    out = (
        (rho / s2) * lower_expect_y(h, k, rho)
        - k * std_bvn_pdf(h, k, rho)
        + _phi(h) * ndtr((k - rho * h) / s)
    )
    return float(out) if np.ndim(out) == 0 else out
