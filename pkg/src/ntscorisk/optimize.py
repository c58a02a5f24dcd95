"""CoCVaR-minimizing frontier and iterative MCT risk budgeting.

Two optimization layers share the long-only simplex as their domain:

  * :func:`min_cocvar_weights` minimizes the portfolio CoCVaR subject to a
    target expected return, by projected gradient descent on one frozen
    sample bank.  Freezing the bank makes the objective a deterministic
    function of the weights, so Armijo backtracking and a final
    pairwise-exchange polish behave like ordinary deterministic
    optimization; reported risks are re-evaluated with quadrature.
  * :func:`budget_iterate` runs the local risk-budgeting loop: at each
    iterate the marginal contributions are estimated on the master bank
    (recorrelated to the current rho_p), a small linear program shifts
    weight from high-MCT to low-MCT assets inside a [-delta, delta] box
    without giving up expected return, and the quadrature risk of every
    iterate is recorded.

The budgeting LP is

    min_Dw  mct' Dw   s.t.  mu' Dw >= 0,  1' Dw = 0,
                            max(-delta, -w_j) <= Dw_j <= delta,

whose box is clipped to keep w + Dw on the nonnegative simplex.  Dw = 0 is
always feasible, so the optimum is never positive; when it is zero to
tolerance the step is exactly zero, and otherwise ties between optimal
vertices are broken toward the lexicographically smallest Dw so repeated
runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import EmptyTail, Infeasible
from .market import MarketModel, project_portfolio, projection_gradient, validate_weights
from .nts_core import grid_for
from .risk import RiskLevels, cocvar_mcs, cocvar_quadrature, cocvar_std_quadrature, covar_std
from .sensitivity import MctVector, mct_cocvar_std, mct_covar_std, mct_portfolio
from .simulation import SampleBank, make_bank

__all__ = [
    "FrontierPoint",
    "BudgetTrace",
    "project_feasible",
    "min_cocvar_weights",
    "efficient_frontier",
    "budget_step",
    "budget_iterate",
    "frontier_to_csv",
    "frontier_to_json",
    "trace_to_csv",
    "trace_to_json",
]

_LP_ZERO = 1e-12
_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}
# A solver answer can undercut the exact vertex objective by leaking its
# feasibility tolerance through the constraints, so the snap acceptance
# slack must sit above that leakage yet far below any true vertex gap.
_SNAP_SLACK = 1e-8
_RETURN_SLACK = 1e-8
_POLISH_SCALES = (6.4e-2, 1.6e-2, 4e-3, 1e-3, 2.5e-4)
_QUAD_SCALES = (1.6e-2, 4e-3, 1e-3, 2.5e-4)
_EXPAND_MAX = 64.0
_DEFAULT_OPTS = {
    "max_iters": 60,
    "tol": 1e-6,
    "step_min": 1e-8,
    "armijo": 1e-4,
    "bank_size": 100_000,
    "seed": 20210,
    "polish": True,
}


@dataclass(frozen=True)
class FrontierPoint:
    """One solved point of the efficient frontier.

    Attributes
    ----------
    mu_star : float
        Target expected return.
    w : ndarray, shape (N,)
        Solution weights on the simplex.
    cocvar : float
        Quadrature CoCVaR of the solution, return units.
    converged : bool
        False when the solver stopped at its iteration cap while still
        descending.
    """

    mu_star: float
    w: np.ndarray
    cocvar: float
    converged: bool


@dataclass(frozen=True)
class BudgetTrace:
    """Recorded path of the risk-budgeting loop.

    Attributes
    ----------
    iterations : list of dict
        Entry per recorded state: {"w", "risk", "expected_return"}; the
        first entry is the starting portfolio.
    measure : str
        ``"covar"`` or ``"cocvar"``; which risk the loop budgets.
    box_halfwidth : float
        Half-width delta of the local step box.
    """

    iterations: list = field(repr=False)
    measure: str = "cocvar"
    box_halfwidth: float = 4e-4


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    cond = u + (1.0 - css) / idx > 0.0
    k = idx[cond][-1]
    tau = (1.0 - css[k - 1]) / k
    return np.maximum(v + tau, 0.0)


def project_feasible(v, mu, mu_star: float) -> np.ndarray:
    """Project onto {w on simplex : mu'w >= mu_star}.

    The Lagrangian of the quadratic projection shifts v by lam*mu before
    the plain simplex projection; the return constraint is monotone in
    lam >= 0, so the multiplier is found by bisection.

    Parameters
    ----------
    v : array_like, shape (N,)
        Point to project.
    mu : array_like, shape (N,)
        Asset expected returns.
    mu_star : float
        Return target.

    Returns
    -------
    ndarray, shape (N,)

    Raises
    ------
    Infeasible
        If mu_star exceeds max(mu).
    """
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if mu_star > np.max(mu) + _RETURN_SLACK:
        raise Infeasible(f"target {mu_star!r} above best asset return {np.max(mu)!r}")
    x = _project_simplex(v)
    if mu @ x >= mu_star - _RETURN_SLACK:
        return x
    lam_hi = 1.0
    while mu @ _project_simplex(v + lam_hi * mu) < mu_star and lam_hi < 1e12:
        lam_hi *= 2.0
    lam_lo = 0.0
    for _ in range(200):
        lam = 0.5 * (lam_lo + lam_hi)
        if mu @ _project_simplex(v + lam * mu) >= mu_star:
            lam_hi = lam
        else:
            lam_lo = lam
    return _project_simplex(v + lam_hi * mu)


def _bank_objective(model: MarketModel, levels: RiskLevels, bank: SampleBank):
    """Deterministic banked CoCVaR objective; infeasible tails map to inf."""

    def f(w: np.ndarray) -> float:
        try:
            return cocvar_mcs(model, w, levels, bank).value
        except EmptyTail:
            return np.inf

    return f


def _exchange_polish(f, w, mu, mu_star, f_val, budget: int = 400, scales=_POLISH_SCALES):
    """Pairwise-exchange descent at shrinking scales on the feasible set.

    The schedule starts coarse so single moves span the sample-jitter
    notches a line search can stall in, then refines; deterministic given
    the objective.
    """
    n = w.size
    dirs = []
    for i in range(n):
        for j in range(n):
            if i != j:
                d = np.zeros(n)
                d[i] = 1.0
                d[j] = -1.0
                dirs.append(d)
    evals = 0
    for scale in scales:
        improved = True
        while improved and evals < budget:
            improved = False
            for d in dirs:
                w_try = project_feasible(w + scale * d, mu, mu_star)
                if np.max(np.abs(w_try - w)) < 1e-15:
                    continue
                f_try = f(w_try)
                evals += 1
                if f_try < f_val:
                    w, f_val = w_try, f_try
                    improved = True
                if evals >= budget:
                    break
    return w, f_val


def min_cocvar_weights(
    model: MarketModel,
    levels: RiskLevels,
    mu_star: float,
    w0,
    opts: dict | None = None,
) -> FrontierPoint:
    """Minimize portfolio CoCVaR at a target expected return.

    Projected gradient descent on the banked objective with the
    Monte-Carlo MCT gradient, Armijo backtracking, and a deterministic
    exchange polish.  The reported risk is the quadrature CoCVaR of the
    final weights.

    Parameters
    ----------
    model : MarketModel
    levels : RiskLevels
    mu_star : float
        Return target; must not exceed the best asset return.
    w0 : array_like, shape (N,)
        Starting weights (projected onto the feasible set).
    opts : dict, optional
        Overrides of max_iters, tol, step_min, armijo, bank_size, seed,
        polish; a prebuilt bank may be passed under ``"bank"``.

    Returns
    -------
    FrontierPoint
    """
    o = dict(_DEFAULT_OPTS)
    if opts:
        o.update(opts)
    mu = model.mu[1:]
    bank = o.get("bank")
    if bank is None:
        bank = make_bank(model.nts.sub, int(o["bank_size"]), int(o["seed"]))
    f = _bank_objective(model, levels, bank)

    w = project_feasible(np.asarray(w0, dtype=float), mu, mu_star)
    w_init = w.copy()
    f_val = f(w)
    converged = True
    for _ in range(int(o["max_iters"])):
        g = mct_portfolio(model, w, levels, "cocvar", bank).values
        pg = w - project_feasible(w - g, mu, mu_star)
        if np.max(np.abs(pg)) < o["tol"]:
            break
        t = 1.0
        accepted = False
        while t >= o["step_min"]:
            w_try = project_feasible(w - t * g, mu, mu_star)
            move = w - w_try
            if np.max(np.abs(move)) < 1e-15:
                break
            f_try = f(w_try)
            if f_try <= f_val - o["armijo"] * float(g @ move):
                # Expand while doubling the step keeps paying: one tangential
                # gradient step is often narrower than the objective's
                # sample-membership notches, and long corner approaches need
                # strides that jump across them.
                while t < _EXPAND_MAX:
                    w_big = project_feasible(w - 2.0 * t * g, mu, mu_star)
                    if np.max(np.abs(w_big - w_try)) < 1e-15:
                        break
                    f_big = f(w_big)
                    if f_big >= f_try:
                        break
                    t, w_try, f_try = 2.0 * t, w_big, f_big
                w, f_val = w_try, f_try
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    else:
        converged = False

    if o["polish"]:
        w, f_val = _exchange_polish(f, w, mu, mu_star, f_val)
        # The bank landscape carries sampling wiggles that can displace its
        # minimizer from the deterministic one, so the reported solution is
        # settled by a short polish on the quadrature objective.  Taking the
        # best of start, bank answer and polished answer under that
        # objective keeps the reported risk a descent from w0.
        warm = {"cv": None}

        def f_quad(w_try: np.ndarray) -> float:
            proj = project_portfolio(model, w_try)
            grid = grid_for(proj.sub)
            cv = covar_std(proj, levels, grid, hint=warm["cv"])
            warm["cv"] = cv
            return proj.sigma_p * cocvar_std_quadrature(proj, levels, cv, grid) - proj.mu_p

        fq_bank = f_quad(w)
        w_q, fq_val = _exchange_polish(
            f_quad, w, mu, mu_star, fq_bank, budget=80, scales=_QUAD_SCALES
        )
        best = min(
            ((f_quad(w_init), 0, w_init), (fq_bank, 1, w), (fq_val, 2, w_q)),
            key=lambda c: c[:2],
        )
        w = best[2]
        converged = True

    return FrontierPoint(
        mu_star=float(mu_star),
        w=w,
        cocvar=float(cocvar_quadrature(model, w, levels)),
        converged=converged,
    )


def efficient_frontier(
    model: MarketModel,
    levels: RiskLevels,
    n_points: int,
    w0,
    opts: dict | None = None,
) -> list[FrontierPoint]:
    """Sweep the CoCVaR frontier over equally spaced return targets.

    Targets run from min to max asset return.  The sweep ascends with warm
    starts, then a descending repair pass replaces any point by a
    higher-target solution that is feasible for it and carries less risk,
    which leaves the reported frontier nondecreasing.

    Parameters
    ----------
    model : MarketModel
    levels : RiskLevels
    n_points : int
        Number of targets, at least 2.
    w0 : array_like
        Starting weights for the first target.
    opts : dict, optional
        Passed through to :func:`min_cocvar_weights`; one bank is shared
        by every point unless the caller supplies their own.

    Returns
    -------
    list of FrontierPoint
    """
    if n_points < 2:
        raise ValueError("need at least 2 frontier points")
    o = dict(_DEFAULT_OPTS)
    if opts:
        o.update(opts)
    if o.get("bank") is None:
        o["bank"] = make_bank(model.nts.sub, int(o["bank_size"]), int(o["seed"]))

    mu = model.mu[1:]
    targets = np.linspace(np.min(mu), np.max(mu), n_points)
    points: list[FrontierPoint] = []
    w = np.asarray(w0, dtype=float)
    for mu_star in targets:
        pt = min_cocvar_weights(model, levels, float(mu_star), w, o)
        points.append(pt)
        w = pt.w

    for k in range(n_points - 2, -1, -1):
        nxt = points[k + 1]
        if nxt.cocvar < points[k].cocvar:
            points[k] = FrontierPoint(
                mu_star=points[k].mu_star,
                w=nxt.w,
                cocvar=nxt.cocvar,
                converged=nxt.converged,
            )
    return points


def _delta_bounds(w: np.ndarray, delta: float) -> list[tuple[float, float]]:
    return [(-min(delta, float(wj)), delta) for wj in w]


def _snap_to_vertex(
    x: np.ndarray, mu: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray | None:
    """Re-solve the active constraints of a near-vertex LP answer exactly.

    Solver output carries the LP feasibility tolerance; when the active
    box, return and sum-to-zero rows have full rank, the vertex they pin
    is the solution of a plain linear system, which removes that noise.
    Returns None when the active set is rank deficient or the snapped
    point leaves the feasible box.
    """
    n = x.size
    atol = 1e-6 * float(np.max(hi - lo)) + 1e-12
    rows = [np.ones(n)]
    rhs = [0.0]
    for j in range(n):
        if abs(x[j] - lo[j]) <= atol or abs(x[j] - hi[j]) <= atol:
            e = np.zeros(n)
            e[j] = 1.0
            rows.append(e)
            rhs.append(lo[j] if abs(x[j] - lo[j]) <= abs(x[j] - hi[j]) else hi[j])
    if abs(float(mu @ x)) <= atol * float(np.linalg.norm(mu)):
        rows.append(mu)
        rhs.append(0.0)
    a = np.asarray(rows)
    b = np.asarray(rhs)
    if np.linalg.matrix_rank(a) < n:
        return None
    snapped, *_ = np.linalg.lstsq(a, b, rcond=None)
    feasible = (
        np.allclose(a @ snapped, b, atol=1e-9)
        and np.all(snapped >= lo - 1e-12)
        and np.all(snapped <= hi + 1e-12)
        and float(mu @ snapped) >= -1e-12 * float(np.linalg.norm(mu))
    )
    return snapped if feasible else None


def budget_step(mct, mu, w, delta: float) -> np.ndarray:
    """Solve the local budgeting LP for one weight shift.

    Parameters
    ----------
    mct : MctVector or array_like
        Marginal contributions driving the objective.
    mu : array_like, shape (N,)
        Asset expected returns.
    w : array_like, shape (N,)
        Current weights; the box is clipped so w + Dw stays nonnegative.
    delta : float
        Box half-width, positive.

    Returns
    -------
    ndarray, shape (N,)
        The step Dw; exactly zero when no strict descent exists.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    c = np.asarray(mct.values if isinstance(mct, MctVector) else mct, dtype=float)
    mu = np.asarray(mu, dtype=float)
    w = np.asarray(w, dtype=float)
    n = c.size
    bounds = _delta_bounds(w, delta)
    a_ub = [-mu]
    b_ub = [0.0]
    a_eq = [np.ones(n)]
    b_eq = [0.0]

    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options=_LP_OPTIONS,
    )
    if not res.success or res.fun >= -_LP_ZERO:
        return np.zeros(n)

    # Pin the optimal face, then walk it to the lexicographically smallest
    # vertex one coordinate at a time.
    a_ub_lex = a_ub + [c]
    b_ub_lex = b_ub + [res.fun + 1e-11]
    a_eq_lex = list(a_eq)
    b_eq_lex = list(b_eq)
    step = res.x
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        sub = linprog(
            e,
            A_ub=np.array(a_ub_lex),
            b_ub=np.array(b_ub_lex),
            A_eq=np.array(a_eq_lex),
            b_eq=np.array(b_eq_lex),
            bounds=bounds,
            method="highs",
            options=_LP_OPTIONS,
        )
        if not sub.success:
            break
        step = sub.x
        a_eq_lex.append(e)
        b_eq_lex.append(float(sub.x[j]))
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    snapped = _snap_to_vertex(step, mu, lo, hi)
    if snapped is not None and float(c @ snapped) <= float(c @ step) + _SNAP_SLACK:
        step = snapped
    return step


def budget_iterate(
    model: MarketModel,
    levels: RiskLevels,
    measure: str,
    w0,
    delta: float = 4e-4,
    L: int = 200,
    bank_size: int = 100_000,
    seed: int = 0,
) -> BudgetTrace:
    """Run the iterative risk-budgeting loop and record its path.

    One master bank is drawn up front; every iteration recorrelates it to
    the current rho_p, estimates the MCT vector on it, solves the local LP
    and applies the step.  The recorded risk per iterate is the quadrature
    value, so traces are deterministic and smooth.

    Parameters
    ----------
    model : MarketModel
    levels : RiskLevels
    measure : str
        ``"covar"`` or ``"cocvar"``.
    w0 : array_like, shape (N,)
        Starting simplex weights.
    delta : float
        LP box half-width, default 4e-4.
    L : int
        Number of iterations, default 200.
    bank_size : int
        Master bank sample count.
    seed : int
        Master bank seed.

    Returns
    -------
    BudgetTrace
        L+1 recorded states, the first being the start.
    """
    if measure not in ("covar", "cocvar"):
        raise ValueError(f"unknown measure {measure!r}")
    if L < 1:
        raise ValueError("L must be at least 1")
    w = validate_weights(w0, model.n_assets).copy()
    mu = model.mu[1:]
    bank = make_bank(model.nts.sub, bank_size, seed)
    grid = grid_for(model.nts.sub)

    def state(w_now: np.ndarray) -> tuple[dict, np.ndarray, float]:
        proj = project_portfolio(model, w_now)
        grad = projection_gradient(model, w_now)
        cv_std = covar_std(proj, levels, grid)
        if measure == "covar":
            risk_std = cv_std
            d_std = mct_covar_std(proj, grad, levels, bank, cv_std)
        else:
            risk_std = cocvar_std_quadrature(proj, levels, cv_std, grid)
            d_std = mct_cocvar_std(proj, grad, levels, bank, cv_std, risk_std)
        risk = proj.sigma_p * risk_std - proj.mu_p
        mct = grad.d_sigma * risk_std + proj.sigma_p * d_std - mu
        entry = {
            "w": w_now.copy(),
            "risk": float(risk),
            "expected_return": float(mu @ w_now),
        }
        return entry, mct, risk

    iterations = []
    for _ in range(L):
        entry, mct, _ = state(w)
        iterations.append(entry)
        w = w + budget_step(mct, mu, w, delta)
    entry, _, _ = state(w)
    iterations.append(entry)
    return BudgetTrace(iterations=iterations, measure=measure, box_halfwidth=delta)


def frontier_to_csv(points: list[FrontierPoint], path) -> None:
    """Write frontier points as CSV: mu_star, cocvar, converged, w_1..w_N."""
    n = points[0].w.size
    lines = ["mu_star,cocvar,converged," + ",".join(f"w_{j + 1}" for j in range(n))]
    for p in points:
        ws = ",".join(repr(float(x)) for x in p.w)
        lines.append(f"{p.mu_star!r},{p.cocvar!r},{int(p.converged)},{ws}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def frontier_to_json(points: list[FrontierPoint]) -> list[dict]:
    """Frontier points as JSON-ready records."""
    return [
        {
            "mu_star": p.mu_star,
            "cocvar": p.cocvar,
            "converged": p.converged,
            "w": [float(x) for x in p.w],
        }
        for p in points
    ]


def trace_to_csv(trace: BudgetTrace, path) -> None:
    """Write a budget trace as CSV: iter, risk, ret, w_1..w_N."""
    n = trace.iterations[0]["w"].size
    lines = ["iter,risk,ret," + ",".join(f"w_{j + 1}" for j in range(n))]
    for i, entry in enumerate(trace.iterations):
        ws = ",".join(repr(float(x)) for x in entry["w"])
        lines.append(f"{i},{entry['risk']!r},{entry['expected_return']!r},{ws}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def trace_to_json(trace: BudgetTrace) -> dict:
    """Budget trace as a JSON-ready record."""
    return {
        "measure": trace.measure,
        "box_halfwidth": trace.box_halfwidth,
        "iterations": [
            {
                "iter": i,
                "risk": entry["risk"],
                "expected_return": entry["expected_return"],
                "w": [float(x) for x in entry["w"]],
            }
            for i, entry in enumerate(trace.iterations)
        ],
    }
