"""Empirical scaling laws for the median and the sweeps that feed them.

Three parameterizations are covered:

* the gap ``Delta_k = mu - k`` at the ``nu = k`` boundary, modelled as
  ``slope*k + intercept + c/k``;
* the scaled boundary mean ``mu/(k+1)`` as a cubic in ``nu/k`` whose
  coefficients carry ``1/(k+1)`` corrections, with the constant term
  pinned to ``ln2/2``;
* the "base median" ``n - floor((k+4)/8)`` compared with the actual median
  when the mean is pinned to an integer ``n``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from poik import dist_core
from poik.dist_core import LN2, OrderKParams
from poik.errors import DomainError, SingularSystem
from poik.median_solver import solve_lambda_star

log = logging.getLogger(__name__)

A0 = LN2 / 2


@dataclass(frozen=True)
class DeltaFit:
    slope: float
    intercept: float
    inv_k_coefficient: float


@dataclass(frozen=True)
class SeriesFit:
    """``mu/(k+1) = a0 + sum_i a_i (nu/k)**i`` with ``a_i = c_i + d_i/(k+1)``.

    Each of ``a1..a3`` is a ``(c_i, d_i)`` pair.
    """

    a1: tuple
    a2: tuple
    a3: tuple
    a0: float = A0

    def coefficients(self, k: int) -> tuple:
        return tuple(c + d / (k + 1) for c, d in (self.a1, self.a2, self.a3))


@dataclass(frozen=True)
class SweepRecord:
    k: int
    n: int
    median: int
    base_median: int
    scaled_diff: float
    scaled_mean: float


@dataclass(frozen=True)
class ResidualReport:
    points: tuple
    max_abs: float
    bias: float

    @classmethod
    def from_points(cls, points):
        points = tuple((float(x), float(r)) for x, r in points)
        res = np.array([r for _, r in points])
        return cls(points, float(np.abs(res).max()), float(res.mean()))


# Published coefficients that fresh fits and residual reports are compared against.
REFERENCE_DELTA_FIT = DeltaFit(0.155752, 0.57765625, -1.0 / 16)
REFERENCE_SERIES_FIT = SeriesFit((0.335, -0.014), (0.356, 0.055), (0.123, -0.7))

DEFAULT_DELTA_KS = tuple(range(2, 2001))
DEFAULT_SERIES_KS = (100, 500, 1000, 2000)
DEFAULT_SERIES_POINTS = 21


def base_median(n: int, k: int) -> int:
    return n - (k + 4) // 8


def mode_conjecture(n: int, k: int) -> int:
    """Conjectured mode ``n - floor((3k+5)/8)`` at mean ``n``; claimed for ``n >= 2*kappa``."""
    if n < k * (k + 1):
        raise DomainError(f"mode formula is claimed only for n >= 2*kappa = {k * (k + 1)}, got n={n}")
    return n - (3 * k + 5) // 8


def delta_k_eval(fit: DeltaFit, k: int) -> float:
    return fit.slope * k + fit.intercept + fit.inv_k_coefficient / k


def _lstsq(design, target, n_params):
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < n_params:
        raise SingularSystem(f"design matrix has rank {rank} < {n_params}")
    return coef


def fit_delta_k(samples: Iterable[Sequence[float]]) -> DeltaFit:
    """Least-squares fit of ``mu - k`` on ``{k, 1, 1/k}`` from ``(k, mu)`` pairs."""
    data = np.asarray(list(samples), dtype=float).reshape(-1, 2)
    k, mu = data[:, 0], data[:, 1]
    if len(np.unique(k)) < 3:
        raise SingularSystem("need at least 3 distinct k values")
    design = np.column_stack([k, np.ones_like(k), 1.0 / k])
    return DeltaFit(*map(float, _lstsq(design, mu - k, 3)))


def mu_series_eval(fit: SeriesFit, k: int, nu: int) -> float:
    """Predicted boundary mean (unscaled) at order ``k`` and median ``nu``."""
    x = nu / k
    a1, a2, a3 = fit.coefficients(k)
    return (k + 1) * (fit.a0 + x * (a1 + x * (a2 + x * a3)))


def fit_mu_series(samples: Iterable[Sequence[float]], *, weighting: str = "relative") -> SeriesFit:
    """Fit the cubic series in ``nu/k`` to ``(k, nu, mu)`` samples.

    ``a0`` is held at ``ln2/2``.  With ``weighting="relative"`` each point's
    residual is divided by its own ``mu/(k+1)``, i.e. relative error is
    minimized; ``"uniform"`` gives plain least squares.
    """
    data = np.asarray(list(samples), dtype=float).reshape(-1, 3)
    k, nu, mu = data.T
    x = nu / k
    if len(np.unique(k)) < 2:
        raise SingularSystem("need at least 2 distinct k values to separate 1/(k+1) terms")
    if len(np.unique(x)) < 4:
        raise SingularSystem("need at least 4 distinct nu/k values")
    scaled = mu / (k + 1)
    inv = 1.0 / (k + 1)
    design = np.column_stack([x, x * inv, x**2, x**2 * inv, x**3, x**3 * inv])
    target = scaled - A0
    if weighting == "relative":
        w = 1.0 / scaled
    elif weighting == "uniform":
        w = np.ones_like(scaled)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    c = [float(v) for v in _lstsq(design * w[:, None], target * w, 6)]
    return SeriesFit((c[0], c[1]), (c[2], c[3]), (c[4], c[5]))


def residual_report(fit, samples, model: str) -> ResidualReport:
    """Per-point residuals of a fitted model.

    ``model="delta_k"`` takes ``(k, mu)`` samples and reports
    ``mu - k - Delta_k(k)`` against ``k``; ``model="mu_series"`` takes
    ``(k, nu, mu)`` and reports ``mu/(k+1) - series`` against ``nu/k``.
    """
    samples = list(samples)
    if not samples:
        raise DomainError("no samples")
    if model == "delta_k":
        pts = [(k, mu - k - delta_k_eval(fit, k)) for k, mu in samples]
    elif model == "mu_series":
        pts = [(nu / k, (mu - mu_series_eval(fit, k, nu)) / (k + 1)) for k, nu, mu in samples]
    else:
        raise ValueError(f"unknown model {model!r}")
    return ResidualReport.from_points(pts)


def parallel_map(fn, items, jobs: int = 1):
    """``list(map(fn, items))``, optionally over a process pool; order is kept."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _boundary_mu(k_nu):
    k, nu = k_nu
    return solve_lambda_star(k, nu).mu_star


def delta_samples(ks: Iterable[int] = DEFAULT_DELTA_KS, *, jobs: int = 1) -> list:
    """``(k, mu)`` at the ``nu = k`` boundary for each ``k``."""
    ks = list(ks)
    mus = parallel_map(_boundary_mu, [(k, k) for k in ks], jobs)
    return list(zip(ks, mus))


def series_grid(k: int, points: int = DEFAULT_SERIES_POINTS) -> list:
    """Integer medians nearest to ``points`` evenly spaced values of ``nu/k`` in [0, 1]."""
    return sorted({round(k * t) for t in np.linspace(0.0, 1.0, points)})


def series_samples(ks: Iterable[int] = DEFAULT_SERIES_KS, points: int = DEFAULT_SERIES_POINTS,
                   *, jobs: int = 1) -> list:
    """``(k, nu, mu)`` boundary samples on the ``nu/k`` grid for each ``k``."""
    pairs = [(k, nu) for k in ks for nu in series_grid(k, points)]
    mus = parallel_map(_boundary_mu, pairs, jobs)
    return [(k, nu, mu) for (k, nu), mu in zip(pairs, mus)]


def sweep_nu_mu(k: int, nu_hi: int) -> list:
    """``(nu, mu_star)`` for ``nu = 0..nu_hi``; past ``nu = k`` the cdf solver is used."""
    if nu_hi < 0:
        raise DomainError(f"nu_hi must be >= 0, got {nu_hi}")
    return [(nu, solve_lambda_star(k, nu).mu_star) for nu in range(nu_hi + 1)]


def default_n_lo(k: int) -> int:
    """Integer mean just past the point where the median leaves zero."""
    return math.ceil((k + 1) * LN2 / 2)


def _sweep_record(k_n):
    k, n = k_n
    nu = dist_core.median(OrderKParams(k, n / (k * (k + 1) // 2)))
    base = base_median(n, k)
    return SweepRecord(k, n, nu, base, (base - nu) / k, n / k)


def sweep_base_median_diff(k: int, n_lo: int | None = None, n_hi: int | None = None,
                           *, step: int = 1, jobs: int = 1) -> list:
    """Median versus base median for integer means ``n_lo, n_lo+step, ..., <= n_hi``.

    ``n_lo`` defaults to :func:`default_n_lo`; ``n_hi`` defaults to
    ``5*k``.  Records where the base median falls below the median are
    counted in the log (see :func:`base_median_violations`), not altered.
    """
    if n_lo is None:
        n_lo = default_n_lo(k)
    if n_hi is None:
        n_hi = 5 * k
    if n_lo < 1 or n_hi < n_lo or step < 1:
        raise DomainError(f"bad sweep range n_lo={n_lo}, n_hi={n_hi}, step={step}")
    records = parallel_map(_sweep_record, [(k, n) for n in range(n_lo, n_hi + 1, step)], jobs)
    below = base_median_violations(records)
    if below:
        log.info("k=%d: base median below median at %d of %d means (n=%d..%d)",
                 k, len(below), len(records), below[0].n, below[-1].n)
    return records


def base_median_violations(records: Iterable[SweepRecord]) -> list:
    """Records whose base median is smaller than the computed median."""
    return [r for r in records if r.base_median < r.median]
