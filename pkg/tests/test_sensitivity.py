"""Marginal risk contributions: dual routes, ranks, Euler consistency."""

import numpy as np
import pytest

from ntscorisk.risk import RiskLevels, cocvar_quadrature, covar
from ntscorisk.sensitivity import MctVector, mct_finite_difference, mct_portfolio
from ntscorisk.simulation import make_bank

from helpers import random_model

LEVELS = RiskLevels(0.05, 0.05)


def _setup(seed=11, n=3):
    model = random_model(n, seed)
    rng = np.random.default_rng(seed + 1000)
    w = rng.dirichlet(np.ones(n) * 5.0)
    return model, w


@pytest.mark.parametrize("measure,tol", [("covar", 1e-4), ("cocvar", 1e-4)])
def test_quadrature_route_matches_finite_differences(measure, tol):
    model, w = _setup()
    ana = mct_portfolio(model, w, LEVELS, measure).values
    fd = mct_finite_difference(model, w, LEVELS, measure, 1e-4)
    assert np.max(np.abs(ana / fd - 1.0)) < tol


def test_finite_difference_error_shrinks_quadratically():
    model, w = _setup(12)
    ana = mct_portfolio(model, w, LEVELS, "cocvar").values
    err = {
        h: np.max(np.abs(mct_finite_difference(model, w, LEVELS, "cocvar", h) - ana))
        for h in (8e-4, 4e-4)
    }
    ratio = err[8e-4] / err[4e-4]
    assert 3.0 < ratio < 5.0


def test_euler_identity_quadrature_route():
    for seed, n in ((21, 3), (22, 5)):
        model, w = _setup(seed, n)
        cv = covar(model, w, LEVELS)
        cc = cocvar_quadrature(model, w, LEVELS)
        g_cv = mct_portfolio(model, w, LEVELS, "covar").values
        g_cc = mct_portfolio(model, w, LEVELS, "cocvar").values
        assert float(w @ g_cv) == pytest.approx(cv, rel=1e-12)
        assert float(w @ g_cc) == pytest.approx(cc, rel=1e-12)


def test_euler_identity_bank_route_is_structural():
    """The weighted noise terms cancel exactly: beta_p and rho_p are
    scale-free in w, so their weighted derivative sums vanish and the
    bank-route Euler sum lands on the deterministic risk regardless of
    sampling error."""
    model, w = _setup(23, 4)
    bank = make_bank(model.nts.sub, 20_000, 77)
    cv = covar(model, w, LEVELS)
    cc = cocvar_quadrature(model, w, LEVELS)
    g_cv = mct_portfolio(model, w, LEVELS, "covar", bank).values
    g_cc = mct_portfolio(model, w, LEVELS, "cocvar", bank).values
    assert float(w @ g_cv) == pytest.approx(cv, rel=1e-12)
    assert float(w @ g_cc) == pytest.approx(cc, rel=1e-12)


def test_bank_route_converges_to_quadrature_route():
    model, w = _setup(24, 3)
    bank = make_bank(model.nts.sub, 400_000, 13)
    for measure, tol in (("covar", 0.05), ("cocvar", 0.10)):
        ana = mct_portfolio(model, w, LEVELS, measure).values
        mc = mct_portfolio(model, w, LEVELS, measure, bank).values
        assert np.max(np.abs(mc / ana - 1.0)) < tol


def test_ranks_are_ascending_one_based():
    model, w = _setup(25, 5)
    out = mct_portfolio(model, w, LEVELS, "cocvar")
    assert isinstance(out, MctVector)
    assert sorted(out.ranks) == [1, 2, 3, 4, 5]
    order = np.argsort(out.ranks)
    assert np.all(np.diff(out.values[order]) >= 0.0)


def test_measure_and_step_validation():
    model, w = _setup(26)
    with pytest.raises(ValueError):
        mct_portfolio(model, w, LEVELS, "var")
    with pytest.raises(ValueError):
        mct_finite_difference(model, w, LEVELS, "covar", 1e-2)
