"""Command-line front end.

One binary, five subcommands: ``fit`` estimates a market model from a
return panel, ``risk`` / ``mct`` report on a model at fixed weights, and
``frontier`` / ``budget`` run the two optimization loops.  Every command
reads an optional JSON config file, lets flags override it, writes its
delimited output plus a rendered PNG into the output directory, and is
deterministic given (input files, config, seed).

Exit codes: 0 ok, 2 input problem, 3 fit failure, 4 weights problem,
5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import figures
from .errors import (
    DegenerateSeries,
    FitNotConverged,
    Infeasible,
    NtsError,
    WeightsError,
)
from .estimate import (
    FIT_GRID,
    fit_model,
    kde_cdf,
    read_returns_csv,
    zscore,
)
from .market import read_model, validate_weights
from .nts_core import grid_for, mixture_marginal_cdf, stdnts_marginal_cdf
from .optimize import (
    budget_iterate,
    efficient_frontier,
    frontier_to_csv,
    frontier_to_json,
    trace_to_csv,
    trace_to_json,
)
from .risk import RiskLevels, compute_risk_report
from .sensitivity import mct_portfolio
from .simulation import make_bank

__all__ = ["RunConfig", "main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3
EXIT_WEIGHTS = 4
EXIT_NUMERICAL = 5


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one command run.

    Defaults follow the worked examples the package reproduces: 5% levels,
    10^5 samples, 51 frontier points, 200 budgeting steps of half-width
    4e-4.  ``measure`` and ``weights_path`` are config-file-only settings;
    everything else also has a flag.
    """

    input_path: str | None = None
    output_path: str = "."
    index_symbol: str = "INDEX"
    zeta: float = 0.05
    eta: float = 0.05
    M: int = 100_000
    seed: int = 1
    delta: float = 4e-4
    L: int = 200
    n_frontier: int = 51
    method: str = "quadrature"
    measure: str = "cocvar"
    weights_path: str | None = None

    def validate(self) -> None:
        if not (0.0 < self.zeta < 1.0 and 0.0 < self.eta < 1.0):
            raise ValueError("zeta and eta must lie in (0, 1)")
        if self.method not in ("quadrature", "mcs"):
            raise ValueError(f"method must be 'quadrature' or 'mcs', got {self.method!r}")
        if self.method == "mcs" and self.M < 1000:
            raise ValueError("method 'mcs' needs at least 1000 samples")
        if self.M < 2:
            raise ValueError("samples must be at least 2")
        if self.measure not in ("covar", "cocvar"):
            raise ValueError(f"measure must be 'covar' or 'cocvar', got {self.measure!r}")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.L < 1:
            raise ValueError("iters must be at least 1")
        if self.n_frontier < 2:
            raise ValueError("points must be at least 2")


_CONFIG_KEYS = {
    "input": "input_path",
    "output": "output_path",
    "index_symbol": "index_symbol",
    "zeta": "zeta",
    "eta": "eta",
    "samples": "M",
    "seed": "seed",
    "delta": "delta",
    "iters": "L",
    "points": "n_frontier",
    "method": "method",
    "measure": "measure",
    "weights": "weights_path",
}

_INT_FIELDS = {"M", "seed", "L", "n_frontier"}
_REAL_FIELDS = {"zeta", "eta", "delta"}


def _load_config_file(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    overrides = {}
    for key, value in doc.items():
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        field = _CONFIG_KEYS[key]
        if field in _INT_FIELDS:
            value = int(value)
        elif field in _REAL_FIELDS:
            value = float(value)
        elif value is not None:
            value = str(value)
        overrides[field] = value
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the config file, and flags; flags win."""
    cfg = RunConfig()
    if args.config is not None:
        cfg = replace(cfg, **_load_config_file(args.config))
    flag_map = {
        "input": "input_path",
        "output": "output_path",
        "zeta": "zeta",
        "eta": "eta",
        "samples": "M",
        "seed": "seed",
        "delta": "delta",
        "iters": "L",
        "points": "n_frontier",
        "method": "method",
    }
    overrides = {}
    for flag, field in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "weights", None) is not None:
        overrides["weights_path"] = args.weights
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _read_weights_file(path: str) -> np.ndarray:
    """Parse weights from a JSON array or whitespace/comma separated text."""
    text = Path(path).read_text().strip()
    if not text:
        raise ValueError(f"weights file {path!r} is empty")
    if text.startswith("["):
        values = json.loads(text)
    else:
        values = [float(tok) for tok in text.replace(",", " ").split()]
    return np.asarray(values, dtype=float)


def _resolve_weights(cfg: RunConfig, n_assets: int) -> np.ndarray:
    if cfg.weights_path is None:
        return np.full(n_assets, 1.0 / n_assets)
    w = _read_weights_file(cfg.weights_path)
    return validate_weights(w, n_assets)


def _load_model(cfg: RunConfig):
    if cfg.input_path is None:
        raise ValueError("this command needs --input (a model JSON file)")
    model, symbols = read_model(cfg.input_path)
    if symbols is None:
        symbols = [cfg.index_symbol] + [f"A{j}" for j in range(1, model.mu.size)]
    return model, symbols


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _fmt(value: float, percent: bool) -> str:
    if percent:
        return f"{100.0 * value:.4f}%"
    return f"{value:.8f}"


def cmd_fit(cfg: RunConfig) -> int:
    """Estimate a model from a return CSV; write JSON, KS table, cdf plot."""
    if cfg.input_path is None:
        raise ValueError("fit needs --input (a returns CSV)")
    panel = read_returns_csv(cfg.input_path, cfg.index_symbol)
    report = fit_model(panel)
    out = _out_dir(cfg)

    _write_json(out / "model.json", report.to_dict())
    lines = ["symbol,ks_statistic,ks_pvalue"]
    for sym, stat, pval in zip(report.symbols, report.ks_stats, report.ks_pvalues):
        lines.append(f"{sym},{float(stat)!r},{float(pval)!r}")
    (out / "ks.csv").write_text("\n".join(lines) + "\n")

    sub = report.to_model().nts.sub
    grid = grid_for(sub)
    kde_curves = []
    model_curves = []
    for j, sym in enumerate(report.symbols):
        residuals = zscore(panel.series[sym]).residuals
        kde_curves.append(kde_cdf(residuals, FIT_GRID))
        if j == 0:
            model_curves.append(stdnts_marginal_cdf(FIT_GRID, sub, float(report.beta[0])))
        else:
            model_curves.append(
                mixture_marginal_cdf(FIT_GRID, sub, float(report.beta[j]), grid)
            )
    figures.fit_figure(report.symbols, FIT_GRID, kde_curves, model_curves, out / "fit_cdf.png")

    print(f"fitted alpha={report.alpha:.6f} theta={report.theta:.6f}")
    for sym, b, stat, pval in zip(
        report.symbols, report.beta, report.ks_stats, report.ks_pvalues
    ):
        print(f"  {sym}: beta={float(b):+.6f} ks={float(stat):.4f} p={float(pval):.4f}")
    print(f"wrote {out / 'model.json'}, {out / 'ks.csv'}, {out / 'fit_cdf.png'}")
    return EXIT_OK


def cmd_risk(cfg: RunConfig, percent: bool = False) -> int:
    """Report VaR, CoVaR and CoCVaR for one weight vector."""
    model, _ = _load_model(cfg)
    w = _resolve_weights(cfg, model.n_assets)
    levels = RiskLevels(cfg.zeta, cfg.eta)
    bank = None
    if cfg.method == "mcs":
        bank = make_bank(model.nts.sub, cfg.M, cfg.seed)
    report = compute_risk_report(model, w, levels, cfg.method, bank)
    out = _out_dir(cfg)

    _write_json(out / "risk.json", report.to_dict())
    figures.risk_figure(report, out / "risk.png")

    print(f"VaR(index)  {_fmt(report.var_index, percent)}")
    print(f"CoVaR       {_fmt(report.covar, percent)}")
    tail = f" (stderr {_fmt(report.stderr, percent)})" if report.stderr is not None else ""
    print(f"CoCVaR      {_fmt(report.cocvar, percent)}{tail}")
    print(f"wrote {out / 'risk.json'}, {out / 'risk.png'}")
    return EXIT_OK


def cmd_mct(cfg: RunConfig, percent: bool = False) -> int:
    """Write the per-asset marginal contribution table with ranks."""
    model, symbols = _load_model(cfg)
    w = _resolve_weights(cfg, model.n_assets)
    levels = RiskLevels(cfg.zeta, cfg.eta)
    bank = None
    if cfg.method == "mcs":
        bank = make_bank(model.nts.sub, cfg.M, cfg.seed)
    mct_cv = mct_portfolio(model, w, levels, "covar", bank)
    mct_cc = mct_portfolio(model, w, levels, "cocvar", bank)
    report = compute_risk_report(model, w, levels, "quadrature")
    euler_cv = float(w @ mct_cv.values)
    euler_cc = float(w @ mct_cc.values)
    out = _out_dir(cfg)

    lines = ["symbol,mct_covar,rank_covar,mct_cocvar,rank_cocvar"]
    for j, sym in enumerate(symbols[1:]):
        lines.append(
            f"{sym},{float(mct_cv.values[j])!r},{int(mct_cv.ranks[j])},"
            f"{float(mct_cc.values[j])!r},{int(mct_cc.ranks[j])}"
        )
    lines.append(f"TOTAL,{euler_cv!r},,{euler_cc!r},")
    (out / "mct.csv").write_text("\n".join(lines) + "\n")
    figures.mct_figure(symbols[1:], mct_cv.values, mct_cc.values, out / "mct.png")

    width = max(len(s) for s in symbols[1:])
    print(f"{'symbol':<{width}}  {'mct_covar':>14} rank  {'mct_cocvar':>14} rank")
    for j, sym in enumerate(symbols[1:]):
        print(
            f"{sym:<{width}}  {_fmt(float(mct_cv.values[j]), percent):>14} "
            f"{int(mct_cv.ranks[j]):>4}  "
            f"{_fmt(float(mct_cc.values[j]), percent):>14} {int(mct_cc.ranks[j]):>4}"
        )
    print(
        f"{'TOTAL':<{width}}  {_fmt(euler_cv, percent):>14}       "
        f"{_fmt(euler_cc, percent):>14}"
    )
    print(
        f"risk report  CoVaR {_fmt(report.covar, percent)}  "
        f"CoCVaR {_fmt(report.cocvar, percent)}"
    )
    print(f"wrote {out / 'mct.csv'}, {out / 'mct.png'}")
    return EXIT_OK


def cmd_frontier(cfg: RunConfig, percent: bool = False) -> int:
    """Sweep the CoCVaR frontier and write its trace and figure."""
    model, _ = _load_model(cfg)
    levels = RiskLevels(cfg.zeta, cfg.eta)
    w0 = np.full(model.n_assets, 1.0 / model.n_assets)
    opts = {"bank_size": cfg.M, "seed": cfg.seed}
    points = efficient_frontier(model, levels, cfg.n_frontier, w0, opts)
    out = _out_dir(cfg)

    frontier_to_csv(points, out / "frontier.csv")
    _write_json(out / "frontier.json", frontier_to_json(points))
    figures.frontier_figure(points, out / "frontier.png")

    print(
        f"{len(points)} frontier points, CoCVaR "
        f"{_fmt(points[0].cocvar, percent)} to {_fmt(points[-1].cocvar, percent)}"
    )
    print(f"wrote {out / 'frontier.csv'}, {out / 'frontier.json'}, {out / 'frontier.png'}")
    bad = [k for k, p in enumerate(points) if not p.converged]
    if bad:
        for k in bad:
            print(
                f"point {k} (target {points[k].mu_star!r}) did not converge",
                file=sys.stderr,
            )
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_budget(cfg: RunConfig, percent: bool = False) -> int:
    """Run the iterative risk-budgeting loop and write its trace."""
    model, _ = _load_model(cfg)
    levels = RiskLevels(cfg.zeta, cfg.eta)
    w0 = _resolve_weights(cfg, model.n_assets)
    trace = budget_iterate(
        model,
        levels,
        cfg.measure,
        w0,
        delta=cfg.delta,
        L=cfg.L,
        bank_size=cfg.M,
        seed=cfg.seed,
    )
    out = _out_dir(cfg)

    trace_to_csv(trace, out / "budget.csv")
    _write_json(out / "budget.json", trace_to_json(trace))
    figures.budget_figure(trace, out / "budget.png")

    first, last = trace.iterations[0], trace.iterations[-1]
    print(
        f"{cfg.L} steps on {trace.measure}: risk "
        f"{_fmt(first['risk'], percent)} -> {_fmt(last['risk'], percent)}, return "
        f"{_fmt(first['expected_return'], percent)} -> "
        f"{_fmt(last['expected_return'], percent)}"
    )
    print(f"wrote {out / 'budget.csv'}, {out / 'budget.json'}, {out / 'budget.png'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntscorisk",
        description="Portfolio CoVaR and CoCVaR under a tempered stable market model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--input", help="input file (returns CSV for fit, model JSON otherwise)")
        p.add_argument("--output", help="output directory (default: current)")
        p.add_argument("--zeta", type=float, help="index VaR level (default 0.05)")
        p.add_argument("--eta", type=float, help="portfolio tail level (default 0.05)")
        p.add_argument("--samples", type=int, help="Monte-Carlo sample count (default 100000)")
        p.add_argument("--seed", type=int, help="sample bank seed (default 1)")
        p.add_argument("--delta", type=float, help="budgeting box half-width (default 4e-4)")
        p.add_argument("--iters", type=int, help="budgeting iteration count (default 200)")
        p.add_argument("--points", type=int, help="frontier point count (default 51)")
        p.add_argument(
            "--method",
            choices=("quadrature", "mcs"),
            help="cocvar backend (default quadrature)",
        )
        p.add_argument(
            "--percent",
            action="store_true",
            help="display risk numbers as percentages (files stay decimal)",
        )

    p_fit = sub.add_parser("fit", help="estimate a model from a returns CSV")
    add_common(p_fit)

    for name, help_text in (
        ("risk", "report VaR, CoVaR and CoCVaR at fixed weights"),
        ("mct", "per-asset marginal contribution table"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        p.add_argument(
            "weights",
            nargs="?",
            help="weights file (JSON array or separated floats); default equal weights",
        )

    p_frontier = sub.add_parser("frontier", help="sweep the CoCVaR efficient frontier")
    add_common(p_frontier)

    p_budget = sub.add_parser("budget", help="iterative risk budgeting from a weights file")
    add_common(p_budget)
    p_budget.add_argument(
        "weights",
        nargs="?",
        help="starting weights file; default equal weights",
    )

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "fit":
            return cmd_fit(cfg)
        percent = bool(getattr(args, "percent", False))
        if args.command == "risk":
            return cmd_risk(cfg, percent)
        if args.command == "mct":
            return cmd_mct(cfg, percent)
        if args.command == "frontier":
            return cmd_frontier(cfg, percent)
        if args.command == "budget":
            return cmd_budget(cfg, percent)
        raise ValueError(f"unknown command {args.command!r}")
    except FitNotConverged as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (WeightsError, Infeasible) as exc:
        print(f"weights problem: {exc}", file=sys.stderr)
        return EXIT_WEIGHTS
    except DegenerateSeries as exc:
        print(f"input problem: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NtsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, KeyError) as exc:
        print(f"input problem: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
