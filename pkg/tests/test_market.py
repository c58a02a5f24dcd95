"""Portfolio projection onto the (index, portfolio) pair and model IO."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntscorisk.errors import ShortPosition, WeightsError
from ntscorisk.market import (
    model_from_dict,
    model_to_dict,
    project_portfolio,
    projection_gradient,
    read_model,
    u_transform,
    v_transform,
    validate_weights,
    write_model,
)

from helpers import random_model


def test_validate_weights_accepts_simplex(bundled_model):
    model, _ = bundled_model
    w = validate_weights([0.5, 0.5, 0.0, 0.0, 0.0], model.n_assets)
    assert w.dtype == np.float64
    assert w.sum() == pytest.approx(1.0)


def test_validate_weights_rejects_shorts_and_bad_shapes(bundled_model):
    model, _ = bundled_model
    with pytest.raises(ShortPosition):
        validate_weights([-0.1, 1.1, 0.0, 0.0, 0.0], model.n_assets)
    with pytest.raises(WeightsError):
        validate_weights([0.25, 0.25, 0.25, 0.25], model.n_assets)
    with pytest.raises(WeightsError):
        validate_weights([0.3] * 5, model.n_assets)


def test_single_asset_projection_recovers_marginal(bundled_model):
    model, _ = bundled_model
    proj = project_portfolio(model, [1.0, 0.0, 0.0, 0.0, 0.0])
    assert proj.beta_p == pytest.approx(model.nts.beta[1], abs=1e-14)
    assert proj.sigma_p == pytest.approx(model.sigma[1], abs=1e-14)
    assert proj.mu_p == pytest.approx(model.mu[1], abs=1e-14)
    assert proj.rho_p == pytest.approx(model.nts.sigma_corr[0, 1], abs=1e-14)


def test_projection_standardized_fields_are_scale_free(bundled_model):
    model, _ = bundled_model
    w = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    base = project_portfolio(model, w)
    scaled = project_portfolio(model, 3.0 * w)
    assert scaled.beta_p == pytest.approx(base.beta_p, rel=1e-12)
    assert scaled.gamma_p == pytest.approx(base.gamma_p, rel=1e-12)
    assert scaled.rho_p == pytest.approx(base.rho_p, rel=1e-12)
    assert scaled.sigma_p == pytest.approx(3.0 * base.sigma_p, rel=1e-12)
    assert scaled.mu_p == pytest.approx(3.0 * base.mu_p, rel=1e-12)


def test_projection_unit_variance_identity(bundled_model):
    model, _ = bundled_model
    w = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    proj = project_portfolio(model, w)
    fac = (2.0 - proj.sub.alpha) / (2.0 * proj.sub.theta)
    assert proj.gamma_p**2 + proj.beta_p**2 * fac == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_projection_gradient_matches_finite_differences(seed):
    model = random_model(4, seed)
    rng = np.random.default_rng(seed + 1)
    w = rng.dirichlet(np.ones(4) * 4.0)
    grad = projection_gradient(model, w)
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        hi = project_portfolio(model, w + e)
        lo = project_portfolio(model, w - e)
        assert grad.d_beta[j] == pytest.approx(
            (hi.beta_p - lo.beta_p) / (2 * h), abs=5e-6
        )
        assert grad.d_gamma[j] == pytest.approx(
            (hi.gamma_p - lo.gamma_p) / (2 * h), abs=5e-6
        )
        assert grad.d_rho[j] == pytest.approx((hi.rho_p - lo.rho_p) / (2 * h), abs=5e-6)
        assert grad.d_sigma[j] == pytest.approx(
            (hi.sigma_p - lo.sigma_p) / (2 * h), abs=5e-6
        )


def test_transforms_standardize_the_pair(bundled_model):
    model, _ = bundled_model
    w = np.full(5, 0.2)
    proj = project_portfolio(model, w)
    t = np.array([0.5, 1.0, 2.0])
    x = 0.7
    expected_u = (x - proj.beta_p * (t - 1.0)) / (proj.gamma_p * np.sqrt(t))
    assert np.allclose(u_transform(x, proj, t), expected_u, atol=1e-14)
    expected_v = (x - proj.beta0 * (t - 1.0)) / (proj.gamma0 * np.sqrt(t))
    assert np.allclose(v_transform(x, proj, t), expected_v, atol=1e-14)


def test_model_json_round_trip(tmp_path, bundled_model):
    model, symbols = bundled_model
    path = tmp_path / "model.json"
    write_model(path, model, symbols)
    back, back_symbols = read_model(path)
    assert back_symbols == symbols
    assert np.array_equal(back.mu, model.mu)
    assert np.array_equal(back.sigma, model.sigma)
    assert np.array_equal(back.nts.beta, model.nts.beta)
    assert np.array_equal(back.nts.sigma_corr, model.nts.sigma_corr)
    assert back.nts.sub == model.nts.sub


def test_model_dict_rejects_missing_keys(bundled_model):
    model, symbols = bundled_model
    doc = model_to_dict(model, symbols)
    del doc["beta"]
    with pytest.raises((KeyError, ValueError)):
        model_from_dict(doc)


def test_model_json_is_plain_data(tmp_path, bundled_model):
    model, symbols = bundled_model
    path = tmp_path / "model.json"
    write_model(path, model, symbols)
    doc = json.loads(path.read_text())
    assert doc["symbols"] == list(symbols)
    assert isinstance(doc["alpha"], float)
