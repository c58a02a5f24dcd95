"""Figure rendering for the command-line report paths.

Every report command drops a PNG next to its delimited output so a run can
be eyeballed without loading the CSVs.  Rendering runs on the Agg backend
and each function writes one file and closes its figure, so the module is
safe in headless batch use.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "frontier_figure",
    "budget_figure",
    "mct_figure",
    "fit_figure",
    "risk_figure",
]

_DPI = 150


def frontier_figure(points, path) -> None:
    """Plot target return against CoCVaR for a solved frontier.

    Parameters
    ----------
    points : list of FrontierPoint
    path : path-like
        Destination PNG.
    """
    risk = [p.cocvar for p in points]
    ret = [p.mu_star for p in points]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(risk, ret, marker="o", markersize=3, lw=1.2)
    ax.set_xlabel("CoCVaR")
    ax.set_ylabel("target expected return")
    ax.set_title("CoCVaR efficient frontier")
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def budget_figure(trace, path) -> None:
    """Plot risk and expected return over the budgeting iterations."""
    risk = [e["risk"] for e in trace.iterations]
    ret = [e["expected_return"] for e in trace.iterations]
    it = np.arange(len(risk))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(it, risk, lw=1.4, color="tab:blue", label=trace.measure)
    ax.set_xlabel("iteration")
    ax.set_ylabel(trace.measure, color="tab:blue")
    ax.tick_params(axis="y", labelcolor="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(it, ret, lw=1.2, color="tab:orange", label="expected return")
    ax2.set_ylabel("expected return", color="tab:orange")
    ax2.tick_params(axis="y", labelcolor="tab:orange")
    ax.set_title("risk budgeting trace")
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def mct_figure(symbols, mct_covar, mct_cocvar, path) -> None:
    """Grouped bars of per-asset marginal contributions."""
    x = np.arange(len(symbols))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(5.0, 1.1 * len(symbols)), 4.0))
    ax.bar(x - width / 2, mct_covar, width, label="MCT-CoVaR")
    ax.bar(x + width / 2, mct_cocvar, width, label="MCT-CoCVaR")
    ax.set_xticks(x)
    ax.set_xticklabels(symbols, rotation=30, ha="right")
    ax.set_ylabel("marginal contribution")
    ax.axhline(0.0, color="black", lw=0.8)
    ax.legend()
    ax.grid(alpha=0.3, axis="y")
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def fit_figure(symbols, grid, kde_curves, model_curves, path) -> None:
    """Overlay kernel and fitted cdfs per series, one panel each."""
    n = len(symbols)
    ncols = min(2, n)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(5.0 * ncols, 3.2 * nrows), squeeze=False
    )
    for j, sym in enumerate(symbols):
        ax = axes[j // ncols][j % ncols]
        ax.plot(grid, kde_curves[j], lw=1.6, label="kernel cdf")
        ax.plot(grid, model_curves[j], lw=1.0, ls="--", label="fitted cdf")
        ax.set_title(sym)
        ax.grid(alpha=0.3)
        if j == 0:
            ax.legend()
    for j in range(n, nrows * ncols):
        axes[j // ncols][j % ncols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def risk_figure(report, path) -> None:
    """Bar chart of the three risk numbers in one report."""
    labels = ["VaR (index)", "CoVaR", "CoCVaR"]
    values = [report.var_index, report.covar, report.cocvar]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    bars = ax.bar(labels, values, color=["tab:gray", "tab:blue", "tab:red"])
    if report.stderr is not None:
        ax.errorbar([2], [report.cocvar], yerr=[report.stderr], fmt="none", ecolor="black", capsize=4)
    ax.bar_label(bars, fmt="%.5f", fontsize=8)
    ax.set_ylabel("loss (return units)")
    ax.set_title(f"zeta={report.zeta:g}, eta={report.eta:g} ({report.method})")
    ax.grid(alpha=0.3, axis="y")
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
