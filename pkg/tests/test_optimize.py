"""Frontier solver, budgeting LP and the iterative budgeting loop."""

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntscorisk.errors import Infeasible
from ntscorisk.optimize import (
    budget_iterate,
    budget_step,
    efficient_frontier,
    frontier_to_csv,
    frontier_to_json,
    min_cocvar_weights,
    project_feasible,
    trace_to_csv,
    trace_to_json,
)
from ntscorisk.risk import RiskLevels, cocvar_quadrature

from helpers import budget_oracle_objective, random_model

LEVELS = RiskLevels(0.05, 0.05)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_project_feasible_lands_on_the_constraint_set(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    v = rng.normal(scale=2.0, size=n)
    mu = rng.uniform(1e-4, 6e-4, n)
    mu_star = float(rng.uniform(mu.min(), mu.max()))
    w = project_feasible(v, mu, mu_star)
    assert w.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(w >= -1e-12)
    assert float(mu @ w) >= mu_star - 1e-8


def test_project_feasible_is_idempotent():
    mu = np.array([2e-4, 4e-4, 6e-4])
    w = project_feasible(np.array([0.2, 0.3, 0.5]), mu, 3e-4)
    again = project_feasible(w, mu, 3e-4)
    assert np.max(np.abs(w - again)) < 1e-9


def test_project_feasible_rejects_unreachable_target():
    mu = np.array([2e-4, 4e-4])
    with pytest.raises(Infeasible):
        project_feasible(np.array([0.5, 0.5]), mu, 5e-4)


def test_two_asset_solution_matches_coarse_grid():
    model = random_model(2, 31)
    mu_star = float(model.mu[1:].min())
    pt = min_cocvar_weights(
        model, LEVELS, mu_star, np.array([0.5, 0.5]), {"bank_size": 20_000, "seed": 531}
    )
    grid = np.linspace(0.0, 1.0, 101)
    vals = [cocvar_quadrature(model, np.array([a, 1.0 - a]), LEVELS) for a in grid]
    a_star = grid[int(np.argmin(vals))]
    assert pt.converged
    assert abs(pt.w[0] - a_star) <= 0.01


def test_solver_reported_risk_descends_from_start():
    model = random_model(3, 44)
    w0 = np.array([0.6, 0.3, 0.1])
    mu_star = float(model.mu[1:].min())
    pt = min_cocvar_weights(model, LEVELS, mu_star, w0, {"bank_size": 20_000})
    start = cocvar_quadrature(model, project_feasible(w0, model.mu[1:], mu_star), LEVELS)
    assert pt.cocvar <= start + 1e-8
    assert pt.w.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(pt.w >= -1e-12)
    assert pt.cocvar == pytest.approx(cocvar_quadrature(model, pt.w, LEVELS), abs=1e-12)


def test_frontier_small_sweep_is_monotone_and_feasible():
    model = random_model(3, 55)
    pts = efficient_frontier(
        model, LEVELS, 7, np.full(3, 1.0 / 3.0), {"bank_size": 20_000}
    )
    assert len(pts) == 7
    mus = np.array([p.mu_star for p in pts])
    risks = np.array([p.cocvar for p in pts])
    assert mus[0] == pytest.approx(float(model.mu[1:].min()))
    assert mus[-1] == pytest.approx(float(model.mu[1:].max()))
    assert np.all(np.diff(mus) > 0.0)
    i_min = int(np.argmin(risks))
    assert np.all(np.diff(risks[i_min:]) >= -1e-12)
    for p in pts:
        assert float(p.w @ model.mu[1:]) >= p.mu_star - 1e-8


def test_frontier_serializers(tmp_path):
    model = random_model(2, 56)
    pts = efficient_frontier(
        model, LEVELS, 3, np.array([0.5, 0.5]), {"bank_size": 10_000}
    )
    path = tmp_path / "frontier.csv"
    frontier_to_csv(pts, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert set(rows[0]) == {"mu_star", "cocvar", "converged", "w_1", "w_2"}
    assert float(rows[1]["cocvar"]) == pytest.approx(pts[1].cocvar)
    docs = frontier_to_json(pts)
    assert [d["mu_star"] for d in docs] == [p.mu_star for p in pts]
    assert all(len(d["w"]) == 2 for d in docs)


def test_budget_step_zero_when_no_descent_exists():
    mct = np.full(4, 0.7)
    mu = np.array([2e-4, 3e-4, 4e-4, 5e-4])
    w = np.full(4, 0.25)
    step = budget_step(mct, mu, w, 4e-4)
    assert np.array_equal(step, np.zeros(4))


def test_budget_step_respects_all_constraints():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n = int(rng.integers(2, 7))
        mct = rng.normal(size=n)
        mu = rng.uniform(1e-4, 6e-4, n)
        w = rng.dirichlet(np.ones(n))
        delta = float(rng.uniform(1e-4, 1e-3))
        step = budget_step(mct, mu, w, delta)
        assert abs(step.sum()) < 1e-10
        assert float(mu @ step) >= -1e-12
        assert np.all(step <= delta + 1e-12)
        assert np.all(w + step >= -1e-12)
        assert float(mct @ step) <= 0.0


def test_budget_step_matches_vertex_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(10):
        mct = rng.normal(size=3)
        mu = rng.uniform(1e-4, 6e-4, 3)
        w = rng.dirichlet(np.ones(3))
        delta = float(rng.uniform(1e-4, 1e-3))
        got = float(mct @ budget_step(mct, mu, w, delta))
        want = budget_oracle_objective(mct, mu, w, delta)
        assert got == pytest.approx(want, abs=1e-10)


def test_budget_step_is_deterministic():
    mct = np.array([0.9, -0.3, 0.1, 0.4])
    mu = np.array([2e-4, 3e-4, 4e-4, 5e-4])
    w = np.array([0.4, 0.3, 0.2, 0.1])
    a = budget_step(mct, mu, w, 4e-4)
    b = budget_step(mct, mu, w, 4e-4)
    assert np.array_equal(a, b)


def test_budget_iterate_short_run(bundled_model):
    model, _ = bundled_model
    trace = budget_iterate(
        model,
        LEVELS,
        "cocvar",
        np.full(5, 0.2),
        delta=4e-4,
        L=5,
        bank_size=20_000,
        seed=3,
    )
    assert trace.measure == "cocvar"
    assert len(trace.iterations) == 6
    rets = [e["expected_return"] for e in trace.iterations]
    assert all(b >= a - 1e-12 for a, b in zip(rets, rets[1:]))
    for e in trace.iterations:
        assert e["w"].sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(e["w"] >= -1e-12)
        assert e["risk"] == pytest.approx(
            cocvar_quadrature(model, e["w"], LEVELS), abs=1e-12
        )


def test_budget_trace_serializers(tmp_path, bundled_model):
    model, _ = bundled_model
    trace = budget_iterate(
        model, LEVELS, "covar", np.full(5, 0.2), delta=4e-4, L=2,
        bank_size=10_000, seed=3,
    )
    path = tmp_path / "budget.csv"
    trace_to_csv(trace, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert rows[0]["iter"] == "0"
    assert float(rows[2]["risk"]) == pytest.approx(trace.iterations[2]["risk"])
    doc = trace_to_json(trace)
    assert doc["measure"] == "covar"
    assert doc["box_halfwidth"] == pytest.approx(4e-4)
    assert len(doc["iterations"]) == 3


def test_budget_iterate_validates_inputs(bundled_model):
    model, _ = bundled_model
    with pytest.raises(ValueError):
        budget_iterate(model, LEVELS, "both", np.full(5, 0.2), L=1)
    with pytest.raises(ValueError):
        budget_iterate(model, LEVELS, "cocvar", np.full(5, 0.2), delta=-1.0, L=1)
