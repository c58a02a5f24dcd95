"""Exception types shared across the library.

Every error raised on a documented failure path derives from NtsError so
callers (and the CLI exit-code mapping) can distinguish input problems,
fitting problems, weight problems, and numerical problems.
"""


class NtsError(Exception):
    """Base class for all library errors."""


class BetaOutOfDomain(NtsError):
    """A skew parameter violates |beta| < sqrt(2*theta/(2-alpha))."""


class InversionNotConverged(NtsError):
    """Fourier inversion failed its self-consistency or mass check."""


class RhoOutOfDomain(NtsError):
    """A correlation argument lies outside (-1, 1)."""


class RhoNearUnity(NtsError):
    """|rho_p| is too close to 1 for the (1 - rho^2) denominators."""


class DegeneratePortfolio(NtsError):
    """Portfolio volatility collapsed below the 1e-14 threshold."""


class RootNotBracketed(NtsError):
    """A quantile root-find could not bracket its target level."""


class EmptyTail(NtsError):
    """No Monte-Carlo sample satisfied the joint tail indicators."""


class ZeroDenominator(NtsError):
    """An implicit-function denominator estimate is numerically zero."""


class SingularCovariance(NtsError):
    """A covariance matrix required to be positive definite is not."""


class Infeasible(NtsError):
    """An optimization target is outside the feasible set."""


class FitNotConverged(NtsError):
    """A curve-fit stage failed to produce an acceptable optimum."""


class DegenerateSeries(NtsError):
    """A return series has zero variance or too few observations."""


class WeightsError(NtsError):
    """Portfolio weights violate the long-only simplex contract."""


class ShortPosition(WeightsError):
    """Portfolio weights contain a negative entry."""
