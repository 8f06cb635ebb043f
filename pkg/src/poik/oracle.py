"""Independent ground truth for the distribution: series expansion and sampling.

Nothing here shares code with the recurrence in :mod:`poik.dist_core`; the
tests lean on that separation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from poik.dist_core import OrderKParams, PmfTable
from poik.errors import DomainError, GuardExceeded

ORACLE_MAX_KLAM = 50.0
ORACLE_MAX_N = 5000


@dataclass(frozen=True, eq=False)
class SampleBatch:
    params: OrderKParams
    seed: int
    values: np.ndarray

    @property
    def count(self) -> int:
        return len(self.values)


def taylor_depth(x: float, tol: float = 1e-16) -> int:
    """Smallest m with x**m / m! < tol."""
    m, term = 0, 1.0
    while term >= tol:
        m += 1
        term *= x / m
    return m


def pmf_by_convolution(params: OrderKParams, n_max: int) -> PmfTable:
    """Coefficients of ``exp(-k*lam) * exp(lam*(x + ... + x**k))`` up to ``x**n_max``.

    Expands ``exp(P) = sum_m P**m / m!`` with repeated Cauchy products.  Since
    ``P`` has no constant term, ``P**m`` starts at ``x**m``, so running ``m``
    up to ``n_max`` leaves no truncation at all in the kept degrees.  A
    shallower depth from the tail bound of the exponential series
    (``(k*lam)**m/m! < 1e-16``) would zero out far-tail coefficients.
    """
    k, lam = params.k, params.lam
    if k * lam > ORACLE_MAX_KLAM or n_max > ORACLE_MAX_N:
        raise GuardExceeded(
            f"oracle limited to k*lambda <= {ORACLE_MAX_KLAM:g} and n_max <= {ORACLE_MAX_N}"
        )
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    poly = np.full(min(k, n_max) + 1, lam)
    poly[0] = 0.0
    term = np.zeros(n_max + 1)
    term[0] = 1.0
    total = term.copy()
    for m in range(1, n_max + 1):
        term = np.convolve(term, poly)[: n_max + 1] / m
        total += term
    return PmfTable(params, total, -(k * lam))


def sample(params: OrderKParams, seed: int, count: int) -> SampleBatch:
    """Draw ``Y = sum_i i * N_i`` with independent ``N_i ~ Poisson(lam)``."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    rng = np.random.Generator(np.random.PCG64(seed))
    values = np.zeros(count, dtype=np.int64)
    for i in range(1, params.k + 1):
        values += i * rng.poisson(params.lam, count)
    values.flags.writeable = False
    return SampleBatch(params, seed, values)


def empirical_cdf(batch: SampleBatch, n: int) -> float:
    if batch.count == 0:
        raise DomainError("empty batch")
    return float(np.count_nonzero(batch.values <= n)) / batch.count


def empirical_median(batch: SampleBatch) -> int:
    """Smallest n with empirical cdf >= 1/2."""
    v = np.sort(batch.values)
    return int(v[math.ceil(batch.count / 2) - 1])
