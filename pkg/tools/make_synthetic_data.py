"""Regenerate the bundled synthetic data files.

Writes ``src/ntscorisk/data/synthetic_model.json`` (a hand-picked
six-dimensional market with heterogeneous returns, vols and skews) and
``src/ntscorisk/data/synthetic_returns.csv`` (a 2500-day panel simulated
from a smaller four-dimensional model, for exercising the fit command).
Both outputs are deterministic; rerunning must reproduce them byte for
byte.
"""

from __future__ import annotations

import datetime
from pathlib import Path

import numpy as np

from ntscorisk.market import MarketModel, write_model
from ntscorisk.nts_core import StdNtsParams, SubordinatorParams
from ntscorisk.simulation import simulate_xi

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "ntscorisk" / "data"

CSV_SEED = 90210
CSV_ROWS = 2500


def factor_corr(loadings) -> np.ndarray:
    """One-factor correlation matrix with unit diagonal."""
    lam = np.asarray(loadings, dtype=float)
    corr = np.outer(lam, lam)
    np.fill_diagonal(corr, 1.0)
    return corr


def risk_model() -> tuple[MarketModel, list[str]]:
    """Six-dimensional market used by the risk, frontier and budget demos."""
    sub = SubordinatorParams(alpha=1.18, theta=0.12)
    beta = np.array([-0.25, -0.15, 0.05, -0.35, 0.20, -0.05])
    corr = factor_corr([0.90, 0.75, 0.60, 0.50, 0.70, 0.55])
    nts = StdNtsParams(sub=sub, beta=beta, sigma_corr=corr)
    mu = np.array([0.00030, 0.00045, 0.00025, 0.00020, 0.00055, 0.00035])
    sigma = np.array([0.0100, 0.0160, 0.0120, 0.0250, 0.0200, 0.0140])
    model = MarketModel(mu=mu, sigma=sigma, nts=nts)
    return model, ["INDEX", "AAA", "BBB", "CCC", "DDD", "EEE"]


def panel_model() -> tuple[MarketModel, list[str]]:
    """Four-dimensional market behind the bundled return panel."""
    sub = SubordinatorParams(alpha=1.20, theta=0.25)
    beta = np.array([-0.20, -0.10, 0.15, -0.30])
    corr = factor_corr([0.85, 0.70, 0.60, 0.65])
    nts = StdNtsParams(sub=sub, beta=beta, sigma_corr=corr)
    mu = np.array([0.0004, 0.0005, 0.0003, 0.0006])
    sigma = np.array([0.009, 0.014, 0.011, 0.017])
    model = MarketModel(mu=mu, sigma=sigma, nts=nts)
    return model, ["INDEX", "AAA", "BBB", "CCC"]


def weekdays(start: datetime.date, count: int) -> list[str]:
    out = []
    day = start
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day.isoformat())
        day += datetime.timedelta(days=1)
    return out


def write_panel_csv(path: Path) -> None:
    model, symbols = panel_model()
    xi = simulate_xi(model.nts, CSV_ROWS, CSV_SEED)
    returns = model.mu + model.sigma * xi
    dates = weekdays(datetime.date(2015, 1, 5), CSV_ROWS)
    lines = ["date," + ",".join(symbols)]
    for day, row in zip(dates, returns):
        cells = ",".join(f"{x:.8f}" for x in row)
        lines.append(f"{day},{cells}")
    path.write_text("\n".join(lines) + "\n")


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    model, symbols = risk_model()
    write_model(DATA_DIR / "synthetic_model.json", model, symbols)
    write_panel_csv(DATA_DIR / "synthetic_returns.csv")
    print(f"wrote {DATA_DIR / 'synthetic_model.json'}")
    print(f"wrote {DATA_DIR / 'synthetic_returns.csv'}")


if __name__ == "__main__":
    main()
