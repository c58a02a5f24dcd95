"""Shared fixtures: the bundled synthetic market and default risk levels."""

from importlib import resources

import numpy as np
import pytest

from ntscorisk.market import read_model
from ntscorisk.risk import RiskLevels


@pytest.fixture(scope="session")
def bundled_model():
    """The packaged 5-asset market (index + AAA..EEE)."""
    with resources.as_file(
        resources.files("ntscorisk.data") / "synthetic_model.json"
    ) as path:
        model, symbols = read_model(path)
    return model, symbols


@pytest.fixture(scope="session")
def bundled_csv_path():
    """Filesystem path of the packaged return panel CSV."""
    with resources.as_file(
        resources.files("ntscorisk.data") / "synthetic_returns.csv"
    ) as path:
        yield path


@pytest.fixture
def levels():
    return RiskLevels(0.05, 0.05)


@pytest.fixture
def equal_weights(bundled_model):
    model, _ = bundled_model
    n = model.n_assets
    return np.full(n, 1.0 / n)
