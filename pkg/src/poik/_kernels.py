"""Compiled inner loops for the compound-Poisson recurrence.

All kernels work on mantissas: ``p_n = m_n * exp(-k*lam + shifts * RESCALE_LOG)``
where ``shifts`` counts how many times the prefix was multiplied by
``RESCALE``.  Scaling by an exact power of two keeps the rescaling itself
free of rounding.
"""

import math

import numpy as np
from numba import njit

RESCALE_EXP = 800
RESCALE = 2.0 ** -RESCALE_EXP
RESCALE_LOG = RESCALE_EXP * math.log(2.0)
# rescale once a mantissa passes ~1e250
RESCALE_TRIGGER = 1e250


@njit(cache=True)
def _next_mantissa(k, lam, n, m):
    top = n if n < k else k
    acc = 0.0
    for j in range(1, top + 1):
        acc += j * m[n - j]
    return lam * acc / n


@njit(cache=True)
def fill_mantissas(k, lam, n_max, m):
    """Fill ``m[0..n_max]`` and return the number of prefix rescalings."""
    m[0] = 1.0
    shifts = 0
    for n in range(1, n_max + 1):
        v = _next_mantissa(k, lam, n, m)
        m[n] = v
        if v > RESCALE_TRIGGER:
            for i in range(n + 1):
                m[i] *= RESCALE
            shifts += 1
    return shifts


@njit(cache=True)
def scan_cdf(k, lam, n_stop, target, m):
    """Accumulate P(Y <= n) for n = 0, 1, ... until it reaches ``target``.

    Returns ``(n, cdf)`` for the first n whose cdf is >= target, or
    ``(n_stop, cdf(n_stop))`` when the target is never reached.  Uses
    Neumaier compensated summation.  ``m`` must hold at least n_stop + 1
    entries and is used as scratch space.
    """
    shifts = 0
    scale = math.exp(-(k * lam))
    m[0] = 1.0
    total = scale
    comp = 0.0
    if total >= target:
        return 0, total
    for n in range(1, n_stop + 1):
        v = _next_mantissa(k, lam, n, m)
        m[n] = v
        if v > RESCALE_TRIGGER:
            for i in range(n + 1):
                m[i] *= RESCALE
            shifts += 1
            scale = math.exp(-(k * lam) + shifts * RESCALE_LOG)
        p = m[n] * scale
        t = total + p
        if abs(total) >= abs(p):
            comp += (total - t) + p
        else:
            comp += (p - t) + total
        total = t
        if total + comp >= target:
            return n, total + comp
    return n_stop, total + comp


@njit(cache=True)
def compensated_cumsum(x):
    out = np.empty_like(x)
    total = 0.0
    comp = 0.0
    for i in range(x.shape[0]):
        p = x[i]
        t = total + p
        if abs(total) >= abs(p):
            comp += (total - t) + p
        else:
            comp += (p - t) + total
        total = t
        out[i] = total + comp
    return out
