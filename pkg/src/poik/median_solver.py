"""Boundary rates at which the median steps from ``nu`` to ``nu + 1``.

For ``0 <= nu <= k`` the cumulative probability has the closed form

    P(Y <= nu) = exp(-k*lam) * sum_{j=0}^{nu} C(nu, j) lam**j / j!

so the boundary rate solves ``k*lam - ln 2 - ln(sum) = 0``.  Beyond ``nu = k``
no such form is available and the solver bisects the tabulated cdf instead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from poik import dist_core
from poik.dist_core import LN2, OrderKParams
from poik.errors import BracketFailure, DomainError

MAX_EXPANSIONS = 60
BISECT_RTOL = 1e-3
_BRENT_RTOL = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class MedianSolveResult:
    k: int
    nu: int
    lambda_star: float
    mu_star: float
    residual: float
    iterations: int
    bracket: tuple
    method: str = "equation"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bracket"] = list(self.bracket)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MedianSolveResult":
        d = dict(d)
        d["bracket"] = tuple(d["bracket"])
        return cls(**d)


def _check_k_nu(k, nu):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise DomainError(f"k must be an integer >= 1, got {k!r}")
    if isinstance(nu, bool) or not isinstance(nu, (int, np.integer)) or nu < 0:
        raise DomainError(f"nu must be an integer >= 0, got {nu!r}")


def log_binomial_series(nu: int, lam: float) -> float:
    """``ln sum_{j=0}^{nu} C(nu, j) lam**j / j!``.

    Terms are built from the ratio ``lam*(nu-j)/(j+1)**2`` of consecutive
    summands, so no factorial is ever formed.
    """
    if nu == 0:
        return 0.0
    j = np.arange(nu, dtype=float)
    ratios = lam * (nu - j) / (j + 1.0) ** 2
    with np.errstate(over="ignore"):
        terms = np.cumprod(ratios)
    if np.isfinite(terms).all():
        return math.log1p(float(np.sum(terms)))
    logs = np.concatenate(([0.0], np.cumsum(np.log(ratios))))
    top = logs.max()
    return top + math.log(float(np.sum(np.exp(logs - top))))


def median_equation_gap(k: int, nu: int, lam: float) -> float:
    """Log-form residual ``k*lam - ln 2 - ln(sum_j C(nu,j) lam^j/j!)``.

    Negative below the boundary rate (median still <= nu), positive above.
    """
    _check_k_nu(k, nu)
    if nu > k:
        raise DomainError(f"closed-form median equation holds only for nu <= k (nu={nu}, k={k})")
    if not lam > 0:
        raise DomainError(f"lambda must be > 0, got {lam!r}")
    return k * lam - LN2 - log_binomial_series(nu, lam)


def _cdf_gap(k, nu, lam):
    return 0.5 - dist_core.cdf_at(OrderKParams(k, lam), nu)


def solve_lambda_star(k: int, nu: int, *, method: str = "auto") -> MedianSolveResult:
    """Rate ``lam`` at which ``P(Y <= nu) = 1/2`` for order ``k``.

    ``method`` is ``"equation"`` (closed form, ``nu <= k`` only), ``"cdf"``
    (bisection of the tabulated cdf) or ``"auto"``, which picks the
    closed form whenever it applies.

    Raises:
        BracketFailure: if no sign change appears within 60 doublings.
    """
    _check_k_nu(k, nu)
    if method == "auto":
        method = "equation" if nu <= k else "cdf"
    if method == "equation":
        if nu > k:
            raise DomainError(f"closed-form median equation holds only for nu <= k (nu={nu}, k={k})")

        def f(lam):
            return k * lam - LN2 - log_binomial_series(nu, lam)

    elif method == "cdf":

        def f(lam):
            return _cdf_gap(k, nu, lam)

    else:
        raise ValueError(f"unknown method {method!r}")

    kappa = k * (k + 1) // 2
    lo = LN2 / k
    if nu == 0:
        return MedianSolveResult(k, nu, lo, kappa * lo, f(lo), 0, (lo, lo), method)

    f_lo = f(lo)
    if f_lo > 0:
        raise BracketFailure(f"gap is positive at the lower end lambda={lo!r}")
    if f_lo == 0:
        return MedianSolveResult(k, nu, lo, kappa * lo, 0.0, 0, (lo, lo), method)

    hi = max(2 * LN2 / max(1, k - nu), 4 * (nu + 1) / kappa)
    for _ in range(MAX_EXPANSIONS):
        if f(hi) > 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise BracketFailure(f"no sign change for k={k}, nu={nu} up to lambda={hi!r}")
    bracket = (lo, hi)

    iterations = 0
    while hi - lo > BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
        iterations += 1
    if f(lo) == 0:
        root = lo
    elif f(hi) == 0:
        root = hi
    else:
        root, info = brentq(f, lo, hi, xtol=1e-300, rtol=_BRENT_RTOL, full_output=True)
        iterations += info.iterations
    return MedianSolveResult(k, nu, root, kappa * root, f(root), iterations, bracket, method)


def _log_series_coefficients(nu):
    # Taylor coefficients c1..c3 of ln(sum_j C(nu,j) lam^j / j!) in powers of lam
    s1 = nu
    s2 = nu * (nu - 1) / 4
    s3 = nu * (nu - 1) * (nu - 2) / 36
    return s1, s2 - s1**2 / 2, s3 - s1 * s2 + s1**3 / 3


def lambda_star_approx(k: int, nu: int, order: int = 1) -> float:
    """Fixed-``nu`` expansion of the boundary rate for ``k`` much larger than ``nu``.

    Moving the linear part of the log-sum to the left gives
    ``(k - nu)*lam = ln 2 + c2*lam**2 + c3*lam**3 + ...``.  Order 1 keeps
    ``ln2/(k - nu)``; orders 2 and 3 substitute it back into the
    ``lam**2`` and ``lam**3`` terms.  For ``nu = 1`` this is
    ``ln2/(k-1) - (ln2)^2/(2(k-1)^3) + (ln2)^3/(3(k-1)^4)``.
    """
    _check_k_nu(k, nu)
    if nu >= k:
        raise DomainError(f"expansion requires nu < k (nu={nu}, k={k})")
    if order not in (1, 2, 3):
        raise DomainError(f"order must be 1, 2 or 3, got {order}")
    gap = k - nu
    lead = LN2 / gap
    _, c2, c3 = _log_series_coefficients(nu)
    value = lead
    if order >= 2:
        value += c2 * lead**2 / gap
    if order >= 3:
        value += c3 * lead**3 / gap
    return value


def verify_boundary(result: MedianSolveResult, *, cdf_tol: float = 1e-9) -> bool:
    """Check a solve against the distribution itself.

    True when ``P(Y <= nu) = 1/2`` to ``cdf_tol`` at ``lambda_star`` and the
    median is ``nu`` just below it and ``nu + 1`` just above it.
    """
    lam = result.lambda_star
    if not lam > 0:
        return False
    k, nu = result.k, result.nu
    if abs(dist_core.cdf_at(OrderKParams(k, lam), nu) - 0.5) > cdf_tol:
        return False
    step = 1e-9 * max(1.0, lam)
    below = dist_core.median(OrderKParams(k, lam - step)) if lam > step else nu
    above = dist_core.median(OrderKParams(k, lam + step))
    return below == nu and above == nu + 1
