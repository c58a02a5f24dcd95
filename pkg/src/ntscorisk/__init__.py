"""Portfolio CoVaR and CoCVaR under a normal tempered stable market model.

The package covers the full workflow: estimate the model from a return
panel, price the conditional risk measures by quadrature or simulation,
decompose them into per-asset marginal contributions, and run frontier
and risk-budgeting optimizations on top.  The ``ntscorisk`` command
exposes the same steps from the shell.
"""

from .errors import (
    BetaOutOfDomain,
    DegeneratePortfolio,
    DegenerateSeries,
    EmptyTail,
    FitNotConverged,
    Infeasible,
    InversionNotConverged,
    NtsError,
    RhoNearUnity,
    RhoOutOfDomain,
    RootNotBracketed,
    ShortPosition,
    SingularCovariance,
    WeightsError,
    ZeroDenominator,
)
from .estimate import FitReport, ReturnPanel, fit_model, read_returns_csv
from .market import (
    MarketModel,
    PortfolioProjection,
    project_portfolio,
    read_model,
    validate_weights,
    write_model,
)
from .nts_core import (
    StdNtsParams,
    SubordinatorParams,
    beta_bound,
    gamma_from_beta,
    stdnts_marginal_cdf,
    stdnts_marginal_pdf,
)
from .optimize import (
    BudgetTrace,
    FrontierPoint,
    budget_iterate,
    budget_step,
    efficient_frontier,
    min_cocvar_weights,
)
from .risk import (
    RiskLevels,
    RiskReport,
    cocvar_mcs,
    cocvar_quadrature,
    compute_risk_report,
    covar,
    var_index,
)
from .sensitivity import MctVector, mct_finite_difference, mct_portfolio
from .simulation import SampleBank, bootstrap_estimate, make_bank, simulate_xi

__version__ = "0.1.0"

__all__ = [
    "BetaOutOfDomain",
    "BudgetTrace",
    "DegeneratePortfolio",
    "DegenerateSeries",
    "EmptyTail",
    "FitNotConverged",
    "FitReport",
    "FrontierPoint",
    "Infeasible",
    "InversionNotConverged",
    "MarketModel",
    "MctVector",
    "NtsError",
    "PortfolioProjection",
    "ReturnPanel",
    "RhoNearUnity",
    "RhoOutOfDomain",
    "RiskLevels",
    "RiskReport",
    "RootNotBracketed",
    "SampleBank",
    "ShortPosition",
    "SingularCovariance",
    "StdNtsParams",
    "SubordinatorParams",
    "WeightsError",
    "ZeroDenominator",
    "beta_bound",
    "bootstrap_estimate",
    "budget_iterate",
    "budget_step",
    "cocvar_mcs",
    "cocvar_quadrature",
    "compute_risk_report",
    "covar",
    "efficient_frontier",
    "fit_model",
    "gamma_from_beta",
    "make_bank",
    "mct_finite_difference",
    "mct_portfolio",
    "min_cocvar_weights",
    "project_portfolio",
    "read_model",
    "read_returns_csv",
    "simulate_xi",
    "stdnts_marginal_cdf",
    "stdnts_marginal_pdf",
    "validate_weights",
    "var_index",
    "write_model",
]
