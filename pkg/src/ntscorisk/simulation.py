"""Seedable Monte-Carlo engine for the standardized NTS market model.

The sampling layer is organised around immutable *banks* of draws.  A
:class:`SampleBank` holds two independent standard normal vectors together
with one vector of subordinator draws; correlation between the index and a
portfolio is injected afterwards by :func:`correlate`, which rotates the
second normal against the first.  Because every estimator is evaluated on
the same frozen bank, two risk numbers computed from one bank differ only
through their formulas (common random numbers), never through fresh noise.

Subordinator draws come from inverse transform against the tabulated cdf of
:func:`ntscorisk.nts_core.subordinator_pdf_grid`; no acceptance-rejection is
used, so a bank is a pure function of ``(params, M, seed)``.

Reductions over a bank use fixed chunk boundaries (:data:`CHUNK`) and merge
partial sums in chunk order, so totals are bit-identical no matter how many
worker threads are used.  The thread count is capped by the environment
variable ``NTSCORISK_THREADS`` (default 1).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import RhoOutOfDomain
from .nts_core import StdNtsParams, SubordinatorParams, grid_for

__all__ = [
    "CHUNK",
    "SampleBank",
    "CorrelatedBank",
    "hash64",
    "make_bank",
    "correlate",
    "simulate_xi",
    "bootstrap_estimate",
    "chunked_mean",
    "thread_count",
]

#: Fixed reduction chunk size; partial sums are merged in chunk order.
CHUNK = 4096

_MASK64 = 0xFFFFFFFFFFFFFFFF


def thread_count() -> int:
    """Worker cap for chunked reductions, from ``NTSCORISK_THREADS``.

    Returns
    -------
    int
        Value of the environment variable, floored at 1; defaults to 1 when
        the variable is unset or unparseable.
    """
    raw = os.environ.get("NTSCORISK_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def hash64(seed: int, k: int) -> int:
    """Derive the 64-bit seed of substream ``k`` from a master seed.

    SplitMix64 finalizer applied to ``seed + (k+1)*golden``: the state is
    advanced by ``k+1`` increments of the golden-ratio constant and the
    result is passed through the standard two-round xor-shift-multiply mix.
    Distinct ``(seed, k)`` pairs give statistically independent streams.

    Parameters
    ----------
    seed : int
        Master seed (any integer; reduced modulo 2^64).
    k : int
        Substream index, k >= 0.

    Returns
    -------
    int
        Derived 64-bit seed.
    """
    z = (seed + (k + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SampleBank:
    """Frozen triple of Monte-Carlo draws shared by all estimators.

    Attributes
    ----------
    eps0, eps1 : ndarray, shape (M,)
        Independent standard normal vectors.
    t_draws : ndarray, shape (M,)
        Positive subordinator draws with unit mean.
    seed : int
        Seed the bank was generated from.
    M : int
        Common length of the three vectors.
    """

    eps0: np.ndarray
    eps1: np.ndarray
    t_draws: np.ndarray
    seed: int
    M: int

    def __post_init__(self) -> None:
        if not (self.eps0.shape == self.eps1.shape == self.t_draws.shape == (self.M,)):
            raise ValueError("bank vectors must share length M")
        if not np.all(self.t_draws > 0.0):
            raise ValueError("subordinator draws must be positive")


@dataclass(frozen=True)
class CorrelatedBank:
    """A :class:`SampleBank` with correlation rotated into the second normal.

    Attributes
    ----------
    eps0 : ndarray, shape (M,)
        First normal vector, shared with the parent bank.
    eps_p : ndarray, shape (M,)
        ``rho*eps0 + sqrt(1-rho^2)*eps1`` elementwise.
    t_draws : ndarray, shape (M,)
        Subordinator draws, shared with the parent bank.
    rho : float
        Injected correlation, |rho| < 1.
    seed : int
        Seed of the parent bank.
    M : int
        Common vector length.
    """

    eps0: np.ndarray
    eps_p: np.ndarray
    t_draws: np.ndarray
    rho: float
    seed: int
    M: int


def make_bank(p: SubordinatorParams, M: int, seed: int) -> SampleBank:
    """Draw a fresh sample bank for the given subordinator parameters.

    The draw order is fixed: ``eps0``, then ``eps1``, then the uniforms that
    are pushed through the tabulated subordinator quantile function.  This
    makes a bank a reproducible function of ``(p, M, seed)``.

    Parameters
    ----------
    p : SubordinatorParams
        Subordinator parameters (alpha, theta).
    M : int
        Number of samples, M >= 1.
    seed : int
        Generator seed.

    Returns
    -------
    SampleBank
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    grid = grid_for(p)
    rng = np.random.default_rng(seed & _MASK64)
    eps0 = rng.standard_normal(M)
    eps1 = rng.standard_normal(M)
    t_draws = grid.ppf(rng.random(M))
    return SampleBank(eps0=eps0, eps1=eps1, t_draws=t_draws, seed=seed, M=M)


def correlate(bank: SampleBank, rho: float) -> CorrelatedBank:
    """Inject correlation ``rho`` between the two normal vectors of a bank.

    Parameters
    ----------
    bank : SampleBank
        Parent bank supplying eps0, eps1 and the subordinator draws.
    rho : float
        Target correlation, |rho| < 1.

    Returns
    -------
    CorrelatedBank
        Bank whose ``eps_p`` equals ``rho*eps0 + sqrt(1-rho^2)*eps1``.

    Raises
    ------
    RhoOutOfDomain
        If |rho| >= 1.
    """
    if not abs(rho) < 1.0:
        raise RhoOutOfDomain(f"need |rho| < 1, got rho={rho!r}")
    eps_p = rho * bank.eps0 + np.sqrt(1.0 - rho * rho) * bank.eps1
    return CorrelatedBank(
        eps0=bank.eps0,
        eps_p=eps_p,
        t_draws=bank.t_draws,
        rho=float(rho),
        seed=bank.seed,
        M=bank.M,
    )


def simulate_xi(p: StdNtsParams, M: int, seed: int) -> np.ndarray:
    """Draw joint samples of the full standardized NTS vector.

    Each row is ``Xi_n = beta_n (T - 1) + gamma_n sqrt(T) eps_n`` with one
    subordinator draw T shared across components and ``eps`` multivariate
    normal with correlation ``p.sigma_corr``.  The normal layer uses a
    Cholesky factor of the correlation matrix, falling back to an
    eigendecomposition square root when the matrix is semidefinite only.

    Parameters
    ----------
    p : StdNtsParams
        Joint standardized parameters of dimension N+1.
    M : int
        Number of joint draws.
    seed : int
        Generator seed.

    Returns
    -------
    ndarray, shape (M, N+1)
        Samples of (Xi_0, ..., Xi_N).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    grid = grid_for(p.sub)
    rng = np.random.default_rng(seed & _MASK64)
    dim = p.dim
    z = rng.standard_normal((M, dim))
    t = grid.ppf(rng.random(M))
    try:
        factor = np.linalg.cholesky(p.sigma_corr)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(p.sigma_corr)
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    eps = z @ factor.T
    sqrt_t = np.sqrt(t)[:, None]
    return p.beta[None, :] * (t[:, None] - 1.0) + p.gamma[None, :] * sqrt_t * eps


def chunked_mean(values: np.ndarray) -> float:
    """Mean of ``values`` with a fixed-order chunked reduction.

    The vector is cut at multiples of :data:`CHUNK`; chunk sums may be
    computed on several threads (capped by ``NTSCORISK_THREADS``) but are
    merged in chunk order, so the result is independent of the worker count.

    Parameters
    ----------
    values : ndarray
        Summands.

    Returns
    -------
    float
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return 0.0
    edges = range(0, n, CHUNK)
    workers = thread_count()
    if workers <= 1 or n <= CHUNK:
        partial = [float(np.sum(values[i : i + CHUNK])) for i in edges]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partial = list(
                pool.map(lambda i: float(np.sum(values[i : i + CHUNK])), edges)
            )
    return sum(partial) / n


@dataclass(frozen=True)
class BootstrapSummary:
    """Spread summary of an estimator over independent replications.

    Attributes
    ----------
    q25, median, q75 : float
        Quartiles of the replicated estimates.
    mean, sd : float
        Sample mean and standard deviation (ddof=1; 0 when reps < 2).
    estimates : ndarray, shape (reps,)
        The individual replicated values.
    """

    q25: float
    median: float
    q75: float
    mean: float
    sd: float
    estimates: np.ndarray = field(repr=False)


def bootstrap_estimate(
    estimator,
    p: SubordinatorParams,
    M: int,
    reps: int,
    seed: int,
) -> BootstrapSummary:
    """Replicate an estimator over independent banks and summarise the spread.

    Replication ``k`` draws its bank from ``hash64(seed, k)``, so the full
    set of banks is reproducible from the master seed alone and adding
    replications never disturbs the earlier ones.

    Parameters
    ----------
    estimator : callable
        Function of a :class:`SampleBank` returning a scalar.
    p : SubordinatorParams
        Subordinator parameters for the banks.
    M : int
        Samples per bank.
    reps : int
        Number of replications, reps >= 2.
    seed : int
        Master seed.

    Returns
    -------
    BootstrapSummary
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    estimates = np.empty(reps)
    for k in range(reps):
        bank = make_bank(p, M, hash64(seed, k))
        estimates[k] = float(estimator(bank))
    q25, median, q75 = np.percentile(estimates, [25.0, 50.0, 75.0])
    return BootstrapSummary(
        q25=float(q25),
        median=float(median),
        q75=float(q75),
        mean=float(np.mean(estimates)),
        sd=float(np.std(estimates, ddof=1)),
        estimates=estimates,
    )
