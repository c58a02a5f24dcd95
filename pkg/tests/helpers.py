"""Model generators and brute-force baselines shared across test modules.

The generators draw admissible one-factor markets from a seed so failures
reproduce exactly; the baselines here are deliberately naive (grid search,
vertex enumeration) so they share no code path with the routines they
check.
"""

import itertools

import numpy as np

from ntscorisk.market import MarketModel
from ntscorisk.nts_core import StdNtsParams, SubordinatorParams, beta_bound


def random_model(n: int, seed: int) -> MarketModel:
    """A heavy-tailed market with ``n`` assets and a one-factor eps layer.

    Subordinator parameters cover the fat-tailed band (alpha 0.9..1.5,
    theta 0.15..1.5), skews fill 70% of the admissible beta interval, and
    the index loading is kept high so index distress actually conditions
    the assets.
    """
    rng = np.random.default_rng(seed)
    sub = SubordinatorParams(alpha=rng.uniform(0.9, 1.5), theta=rng.uniform(0.15, 1.5))
    bound = beta_bound(sub)
    beta = rng.uniform(-0.7, 0.7, n + 1) * bound
    lam = rng.uniform(0.45, 0.85, n + 1)
    lam[0] = rng.uniform(0.8, 0.92)
    corr = np.outer(lam, lam)
    np.fill_diagonal(corr, 1.0)
    nts = StdNtsParams(sub=sub, beta=beta, sigma_corr=corr)
    return MarketModel(
        mu=rng.uniform(1e-4, 6e-4, n + 1),
        sigma=rng.uniform(0.008, 0.028, n + 1),
        nts=nts,
    )


def limit_model(seed: int) -> MarketModel:
    """A two-asset market at the near-Gaussian corner (alpha 1.99, theta 50)."""
    rng = np.random.default_rng(seed)
    sub = SubordinatorParams(alpha=1.99, theta=50.0)
    beta = rng.uniform(-0.15, 0.15, 3)
    lam = np.array(
        [rng.uniform(0.8, 0.9), rng.uniform(0.5, 0.8), rng.uniform(0.5, 0.8)]
    )
    corr = np.outer(lam, lam)
    np.fill_diagonal(corr, 1.0)
    nts = StdNtsParams(sub=sub, beta=beta, sigma_corr=corr)
    return MarketModel(
        mu=rng.uniform(1e-4, 6e-4, 3),
        sigma=rng.uniform(0.008, 0.028, 3),
        nts=nts,
    )


def budget_oracle_objective(c, mu, w, delta: float) -> float:
    """Exact optimum of the budgeting LP by active-set vertex enumeration.

    The feasible set lives in the hyperplane 1'x = 0; every vertex pins
    n - 1 further constraints chosen from the box faces and the
    expected-return face.  Enumerating those supports and solving the
    square systems visits every vertex, and the LP optimum sits at one of
    them (or at x = 0, which is always feasible).
    """
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    w = np.asarray(w, dtype=float)
    n = c.size
    lo = np.array([-min(delta, wj) for wj in w])
    hi = np.full(n, delta)
    faces = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        faces.append((e, lo[j]))
        faces.append((e, hi[j]))
    faces.append((mu, 0.0))
    best = 0.0
    for combo in itertools.combinations(range(len(faces)), n - 1):
        a = np.array([np.ones(n)] + [faces[i][0] for i in combo])
        b = np.array([0.0] + [faces[i][1] for i in combo])
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        x = np.linalg.solve(a, b)
        if (
            np.all(x >= lo - 1e-10)
            and np.all(x <= hi + 1e-10)
            and float(mu @ x) >= -1e-12
        ):
            best = min(best, float(c @ x))
    return best
