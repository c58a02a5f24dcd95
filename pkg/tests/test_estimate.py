"""Estimation pipeline pieces: parsing, standardization, fits, KS."""

import numpy as np
import pytest

from ntscorisk.errors import DegenerateSeries
from ntscorisk.estimate import (
    FIT_GRID,
    kde_cdf,
    ks_test,
    fit_step2,
    fit_step3,
    read_returns_csv,
    zscore,
)
from ntscorisk.nts_core import (
    StdNtsParams,
    SubordinatorParams,
    gamma_from_beta,
    mixture_marginal_cdf,
)
from ntscorisk.simulation import simulate_xi

SUB = SubordinatorParams(alpha=1.20, theta=0.25)


def test_read_returns_csv_parses_bundled_panel(bundled_csv_path):
    panel = read_returns_csv(bundled_csv_path, "INDEX")
    assert panel.symbols[0] == "INDEX"
    assert len(panel.symbols) == 4
    n = len(panel.dates)
    assert n >= 250
    assert all(len(panel.series[s]) == n for s in panel.symbols)


def test_read_returns_csv_error_messages(tmp_path):
    bad_header = tmp_path / "a.csv"
    bad_header.write_text("time,INDEX,AAA\n2020-01-01,0.1,0.2\n")
    with pytest.raises(ValueError, match="first CSV column must be 'date'"):
        read_returns_csv(bad_header, "INDEX")

    ragged = tmp_path / "b.csv"
    ragged.write_text("date,INDEX,AAA\n2020-01-01,0.1\n")
    with pytest.raises(ValueError, match="row 2: expected 3 cells"):
        read_returns_csv(ragged, "INDEX")

    unparseable = tmp_path / "c.csv"
    unparseable.write_text("date,INDEX,AAA\n2020-01-01,0.1,oops\n")
    with pytest.raises(ValueError, match="cannot parse 'oops' in column 'AAA'"):
        read_returns_csv(unparseable, "INDEX")

    empty = tmp_path / "d.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty CSV"):
        read_returns_csv(empty, "INDEX")


def test_read_returns_csv_requires_known_index(tmp_path):
    path = tmp_path / "e.csv"
    rows = "\n".join(f"2020-{1 + d // 28:02d}-{1 + d % 28:02d},0.01,0.02" for d in range(280))
    path.write_text("date,SPX,AAA\n" + rows + "\n")
    with pytest.raises(ValueError, match="not among series"):
        read_returns_csv(path, "INDEX")


def test_zscore_standardizes():
    rng = np.random.default_rng(0)
    x = 3.0 + 2.0 * rng.standard_normal(500)
    z = zscore(x)
    assert float(np.mean(z.residuals)) == pytest.approx(0.0, abs=1e-12)
    assert float(np.std(z.residuals, ddof=1)) == pytest.approx(1.0, abs=1e-12)
    assert z.mu == pytest.approx(float(np.mean(x)))
    assert z.sigma == pytest.approx(float(np.std(x, ddof=1)))


def test_zscore_rejects_degenerate_series():
    with pytest.raises(DegenerateSeries):
        zscore([0.5])
    with pytest.raises(DegenerateSeries):
        zscore(np.full(100, 0.25))


def test_kde_cdf_is_a_distribution_function():
    rng = np.random.default_rng(1)
    sample = rng.standard_normal(2000)
    vals = kde_cdf(sample, FIT_GRID)
    assert np.all(np.diff(vals) >= 0.0)
    assert vals[0] >= 0.0
    assert vals[-1] <= 1.0
    assert vals[-1] > 0.999


def test_fit_step2_recovers_a_known_skew():
    beta_true = 0.04
    nts = StdNtsParams(
        sub=SUB,
        beta=np.array([beta_true, beta_true]),
        sigma_corr=np.eye(2),
    )
    xi = simulate_xi(nts, 60_000, 9)
    resid = zscore(xi[:, 0]).residuals
    beta_hat = fit_step2(resid, SUB.alpha, SUB.theta)
    assert beta_hat == pytest.approx(beta_true, abs=0.05)


def test_fit_step3_inverts_the_covariance_map():
    lam = np.array([0.85, 0.70, 0.60])
    corr = np.outer(lam, lam)
    np.fill_diagonal(corr, 1.0)
    betas = np.array([-0.2, -0.1, 0.15])
    nts = StdNtsParams(sub=SUB, beta=betas, sigma_corr=corr)
    xi = simulate_xi(nts, 300_000, 12)
    resid = np.column_stack([zscore(xi[:, j]).residuals for j in range(3)])
    est = fit_step3(resid, SUB.alpha, SUB.theta, betas)
    assert est.shape == (3, 3)
    assert np.allclose(np.diag(est), 1.0, atol=1e-12)
    assert np.allclose(est, est.T, atol=1e-12)
    assert np.max(np.abs(est - corr)) < 0.02
    assert np.min(np.linalg.eigvalsh(est)) > 0.0


def test_ks_statistic_floor_on_stratified_sample():
    """Points placed at the (i - 1/2)/n model quantiles leave exactly a
    0.5/n gap to each staircase side, the smallest any sample achieves."""
    n = 200
    targets = (np.arange(n) + 0.5) / n
    lo, hi = -12.0, 12.0
    x = np.empty(n)
    for i, q in enumerate(targets):
        a, b = lo, hi
        for _ in range(80):
            m = 0.5 * (a + b)
            if mixture_marginal_cdf(m, SUB, -0.1) < q:
                a = m
            else:
                b = m
        x[i] = 0.5 * (a + b)
    out = ks_test(x, SUB.alpha, SUB.theta, -0.1)
    assert out["statistic"] == pytest.approx(0.5 / n, abs=1e-6)
    assert out["pvalue"] > 0.999


def test_ks_test_rejects_a_wrong_law():
    rng = np.random.default_rng(3)
    sample = rng.standard_t(df=3, size=5000)
    out = ks_test(sample, 1.9, 10.0, 0.0)
    assert out["pvalue"] < 1e-4


def test_gamma_consistency_of_fit_grid():
    # the fit grid spans the standardized residual range symmetric about 0
    assert FIT_GRID[0] == -FIT_GRID[-1]
    assert FIT_GRID.size % 2 == 1
    assert gamma_from_beta(SUB, 0.0) == 1.0
