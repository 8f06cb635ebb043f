"""The Poisson distribution of order k.

The distribution has probability generating function

    exp(-k*lam) * exp(lam * (x + x**2 + ... + x**k))

and equals the standard Poisson distribution when ``k == 1``.  Two
independent evaluation paths are provided:

* :func:`pmf_table` runs the compound-Poisson recurrence
  ``p_n = (lam/n) * sum_{j=1}^{min(n,k)} j * p_{n-j}`` on scaled mantissas and
  is the production path (any ``k*lam`` that fits in memory).
* :func:`pmf_combinatorial` evaluates the closed-form combinatorial sums for a
  single ``n``.  It is exact up to the final rounding but costs big-integer
  arithmetic, so it is used for validation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from numbers import Integral, Real

import numpy as np
from scipy.optimize import brentq

from poik import _kernels
from poik.errors import AllocationBound, DomainError, GuardExceeded, OutOfRange

LN2 = math.log(2.0)

#: Largest table (number of entries minus one) built without complaint.
TABLE_CAP = 10_000_000
#: ``k*lam`` above which the exp(-k*lam) prefactor of the combinatorial path
#: underflows in double precision.
COMBINATORIAL_GUARD = 700.0
#: Relative tolerance used to report tied modes.
MODE_TIE_RTOL = 1e-12
#: Slack when comparing a cumulative probability against 1/2.  Absorbs the
#: last-ulp rounding of exp(-k*lam) at lam = ln2/k and similar boundaries.
HALF_TOL = 1e-13
#: Tail mass allowed beyond :func:`support_bound`.
TAIL_MASS = 1e-12


@dataclass(frozen=True)
class OrderKParams:
    """Order ``k`` and rate ``lam`` of one distribution."""

    k: int
    lam: float

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, Integral):
            raise DomainError(f"k must be an integer, got {self.k!r}")
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        if not isinstance(self.lam, Real) or not math.isfinite(self.lam) or self.lam <= 0:
            raise DomainError(f"lambda must be finite and > 0, got {self.lam!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "lam", float(self.lam))

    def kappa(self) -> int:
        return self.k * (self.k + 1) // 2


@dataclass(frozen=True, eq=False)
class PmfTable:
    """Probabilities ``p_0..p_N`` stored as ``mantissas * exp(log_scale)``.

    Splitting off a common scale keeps the mantissas representable even when
    ``p_0 = exp(-k*lam)`` underflows; :func:`pmf_table` normalizes them so the
    largest equals one.
    """

    params: OrderKParams
    mantissas: np.ndarray
    log_scale: float

    @property
    def n_max(self) -> int:
        return len(self.mantissas) - 1

    @cached_property
    def probabilities(self) -> np.ndarray:
        p = self.mantissas * math.exp(self.log_scale)
        p.flags.writeable = False
        return p

    @cached_property
    def cumulative(self) -> np.ndarray:
        c = np.clip(_kernels.compensated_cumsum(self.probabilities), 0.0, 1.0)
        c.flags.writeable = False
        return c

    def pmf(self, n: int) -> float:
        self._check_index(n)
        return float(self.probabilities[n])

    def log_pmf(self, n: int) -> float:
        """Natural log of ``p_n``; exact anchor ``-k*lam`` at ``n = 0``."""
        self._check_index(n)
        if n == 0:
            return -(self.params.k * self.params.lam)
        m = self.mantissas[n]
        return math.log(m) + self.log_scale if m > 0 else -math.inf

    def _check_index(self, n):
        if n < 0 or n > self.n_max:
            raise OutOfRange(f"n={n} outside table 0..{self.n_max}")


@dataclass(frozen=True)
class ModeSet:
    modes: tuple
    peak_probability: float


def mean(params: OrderKParams) -> float:
    return params.kappa() * params.lam


def variance(params: OrderKParams) -> float:
    k = params.k
    return (k * (k + 1) * (2 * k + 1) // 6) * params.lam


def _log_tail_bound(k, lam, n):
    """Chernoff bound on ``ln P(Y >= n)`` for ``n`` above the mean.

    ``P(Y >= n) <= exp(-t*n) * E[exp(t*Y)]`` with ``t`` at the minimizer,
    where ``lam * sum_j j*exp(t*j) = n``.
    """
    j = np.arange(1, k + 1, dtype=float)

    def slope(t):
        return lam * float(np.dot(j, np.exp(t * j))) - n

    hi = math.log(n / (lam * k)) / k
    t = brentq(slope, 0.0, hi) if slope(hi) > 0 else hi
    return -t * n + lam * float(np.sum(np.expm1(t * j)))


def support_bound(params: OrderKParams) -> int:
    """Index beyond which the tail mass is below ``TAIL_MASS``.

    Starts from ``ceil(mean + 12*sd + 32)``.  That is enough unless the rate
    is small and ``k`` large, where a few long jumps give the tail far more
    weight than ``sd`` suggests; then the bound is moved out to the first
    index whose exact tail (table sum plus a Chernoff remainder) qualifies.
    """
    k, lam = params.k, params.lam
    n0 = math.ceil(mean(params) + 12.0 * math.sqrt(variance(params)) + 32.0)
    log_tol = math.log(TAIL_MASS)
    if _log_tail_bound(k, lam, n0) <= log_tol:
        return n0
    # first index where the Chernoff remainder alone is negligible
    target = log_tol + math.log(1e-3)
    lo, hi = n0, 2 * n0
    while _log_tail_bound(k, lam, hi) > target:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _log_tail_bound(k, lam, mid) > target:
            lo = mid
        else:
            hi = mid
    p = pmf_table(params, hi).probabilities
    tail = np.cumsum(p[::-1])[::-1] - p + math.exp(_log_tail_bound(k, lam, hi))
    return n0 + int(np.argmax(tail[n0:] < TAIL_MASS))


def eq5_branch(k: int, n: int) -> str:
    """Name of the closed-form branch that covers index ``n``."""
    if n == 0:
        return "n=0"
    if n <= k:
        return "1<=n<=k"
    return "n>k"


def _inner_numerator(M, i, a, b):
    """``sum_j C(M+i-1, j+i-1) * a**j * b**(M-j) * M!/j!`` as an exact integer.

    This is ``b**M * M!`` times ``sum_j C(M+i-1, j+i-1) lam**j / j!`` with
    ``lam = a/b``.  The j = 0 term vanishes when ``i == 0``.
    """
    if i == 0:
        j = 1
        term = a * b ** (M - 1) * math.factorial(M)
    else:
        j = 0
        term = math.comb(M + i - 1, i - 1) * b**M * math.factorial(M)
    total = 0
    while True:
        total += term
        if j == M:
            return total
        # exact: consecutive terms differ by a(M-j) / (b(j+1)(j+i))
        term = term * a * (M - j) // (b * (j + 1) * (j + i))
        j += 1


def _first_sum_numerator(n, a, b):
    # sum_{j=1}^{n} C(n-1, j-1) lam^j / j!, over the denominator b**n * n!
    return _inner_numerator(n, 0, a, b)


def _alternating_numerator(n, k, a, b):
    # - sum_{i=1}^{l} (-1)^(i-1) lam^i/i! * sum_j C(n-i(k+1)+i-1, j+i-1) lam^j/j!
    # over the common denominator b**n * n!
    total = 0
    for i in range(1, n // (k + 1) + 1):
        M = n - i * (k + 1)
        multinomial = math.comb(n, i) * math.comb(n - i, M) * math.factorial(n - i - M)
        term = a**i * _inner_numerator(M, i, a, b) * b ** (n - i - M) * multinomial
        total += term if i % 2 == 0 else -term
    return total


def _scaled_ratio(num, den, log_factor):
    """``num/den * exp(log_factor)`` for big integers, without overflow."""
    if num == 0:
        return 0.0
    if num < 0:
        return -_scaled_ratio(-num, den, log_factor)
    e = num.bit_length() - den.bit_length()
    x = num / (den << e) if e >= 0 else (num << -e) / den
    return math.ldexp(x * math.exp(log_factor), e)


def pmf_combinatorial(params: OrderKParams, n: int) -> float:
    """Single probability ``p_n`` from the closed-form combinatorial sums.

    ``lam`` is taken as the exact binary fraction it stores, and the sums
    (including the alternating one for ``n > k``) are carried out in exact
    integer arithmetic, so the only roundings are the final division and
    the ``exp(-k*lam)`` prefactor.

    Raises:
        GuardExceeded: if ``k*lam > 700``; use :func:`pmf_table` there.
    """
    k, lam = params.k, params.lam
    kl = k * lam
    if kl > COMBINATORIAL_GUARD:
        raise GuardExceeded(f"k*lambda={kl:g} exceeds {COMBINATORIAL_GUARD:g}; use pmf_table")
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if n == 0:
        return math.exp(-kl)
    a, b = lam.as_integer_ratio()
    den = b**n * math.factorial(n)
    num = _first_sum_numerator(n, a, b)
    if n > k:
        num += _alternating_numerator(n, k, a, b)
    return _scaled_ratio(num, den, -kl)


def pmf_table(params: OrderKParams, n_max: int, *, cap: int = TABLE_CAP) -> PmfTable:
    """Probabilities ``p_0..p_{n_max}`` via the compound-Poisson recurrence."""
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    if n_max > cap:
        raise AllocationBound(f"n_max={n_max} exceeds table cap {cap}")
    m = np.empty(n_max + 1)
    shifts = _kernels.fill_mantissas(params.k, params.lam, n_max, m)
    _, e = math.frexp(m.max())
    m = np.ldexp(m, -e)
    log_scale = -(params.k * params.lam) + (shifts * _kernels.RESCALE_EXP + e) * LN2
    m.flags.writeable = False
    return PmfTable(params, m, log_scale)


def cdf(table: PmfTable, n: int) -> float:
    """``P(Y <= n)`` from a table; 0 for negative ``n``."""
    if n > table.n_max:
        raise OutOfRange(f"n={n} beyond table end {table.n_max}")
    if n < 0:
        return 0.0
    return float(table.cumulative[n])


def cdf_at(params: OrderKParams, n: int) -> float:
    """``P(Y <= n)`` without materializing a table past ``n``."""
    if n < 0:
        return 0.0
    scratch = np.empty(n + 1)
    _, c = _kernels.scan_cdf(params.k, params.lam, n, math.inf, scratch)
    return min(max(c, 0.0), 1.0)


def median(params: OrderKParams) -> int:
    """Smallest ``nu`` with ``P(Y <= nu) >= 1/2``."""
    bound = support_bound(params)
    if bound > TABLE_CAP:
        raise AllocationBound(f"support bound {bound} exceeds table cap {TABLE_CAP}")
    scratch = np.empty(bound + 1)
    nu, c = _kernels.scan_cdf(params.k, params.lam, bound, 0.5 - HALF_TOL, scratch)
    if c < 0.5 - HALF_TOL:
        raise ArithmeticError(f"cdf reached only {c!r} by n={bound} for {params}")
    return int(nu)


def mode(params: OrderKParams) -> ModeSet:
    """All global maximizers of the pmf, ties within ``MODE_TIE_RTOL``."""
    table = pmf_table(params, support_bound(params))
    m = table.mantissas
    top = m.max()
    modes = tuple(int(i) for i in np.flatnonzero(m >= top * (1.0 - MODE_TIE_RTOL)))
    peak = max(table.pmf(i) for i in modes)
    return ModeSet(modes, peak)
