"""Self-checks run by ``poik verify``.

Each check returns a list of :class:`CheckResult`; a failing result names the
branch or parameter set that broke.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from poik import dist_core, oracle
from poik.dist_core import LN2, OrderKParams
from poik.median_solver import solve_lambda_star, verify_boundary
from poik.scaling_fit import base_median, mode_conjecture

PMF_RTOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f": {self.detail}" if self.detail else ""
        return f"{tag} {self.name}{extra} ({self.seconds:.2f}s)"


def _close(a, b, rtol=PMF_RTOL):
    return abs(a - b) <= rtol * max(abs(a), abs(b)) or max(abs(a), abs(b)) < 1e-300


def three_way_pmf(param_grid, n_hi):
    """Combinatorial sums vs recurrence vs series oracle, reported per branch."""
    failures = {"n=0": [], "1<=n<=k": [], "n>k": []}
    for k, lam in param_grid:
        params = OrderKParams(k, lam)
        table = dist_core.pmf_table(params, n_hi)
        ref = oracle.pmf_by_convolution(params, n_hi)
        for n in range(n_hi + 1):
            c = dist_core.pmf_combinatorial(params, n)
            r = table.pmf(n)
            o = ref.pmf(n)
            if not (_close(c, r) and _close(c, o) and _close(r, o)):
                failures[dist_core.eq5_branch(k, n)].append((k, lam, n, c, r, o))
    out = []
    for branch, bad in failures.items():
        detail = ""
        if bad:
            k, lam, n, c, r, o = bad[0]
            detail = (f"{len(bad)} mismatches, first at k={k} lambda={lam} n={n}: "
                      f"combinatorial={c!r} recurrence={r!r} oracle={o!r}")
        out.append(CheckResult(f"pmf three-way agreement, branch {branch}", not bad, detail))
    return out


def median_zero_boundary(k_hi=100):
    bad = []
    for k in range(1, k_hi + 1):
        lam = LN2 / k
        if dist_core.median(OrderKParams(k, lam)) != 0 or dist_core.median(OrderKParams(k, lam + 1e-9)) != 1:
            bad.append(k)
    return [CheckResult(f"median zero iff lambda <= ln2/k, k=1..{k_hi}", not bad,
                        f"fails at k={bad[:5]}" if bad else "")]


def median_formula(k_lo, k_hi):
    bad = []
    for k in range(k_lo, k_hi + 1):
        kappa = k * (k + 1) // 2
        for n in range(kappa, 4 * kappa + 1):
            if dist_core.median(OrderKParams(k, n / kappa)) != base_median(n, k):
                bad.append((k, n))
    return [CheckResult(f"median = n - floor((k+4)/8), k={k_lo}..{k_hi}, n in [kappa, 4kappa]",
                        not bad, f"{len(bad)} failures, first {bad[:3]}" if bad else "")]


def mode_formula(k_lo, k_hi):
    bad = []
    for k in range(k_lo, k_hi + 1):
        kappa = k * (k + 1) // 2
        for n in range(2 * kappa, 5 * kappa + 1):
            if mode_conjecture(n, k) not in dist_core.mode(OrderKParams(k, n / kappa)).modes:
                bad.append((k, n))
    return [CheckResult(f"mode contains n - floor((3k+5)/8), k={k_lo}..{k_hi}, n in [2kappa, 5kappa]",
                        not bad, f"{len(bad)} failures, first {bad[:3]}" if bad else "")]


def solver_boundaries(cases):
    bad = [(k, nu) for k, nu in cases if not verify_boundary(solve_lambda_star(k, nu))]
    return [CheckResult(f"solved boundary rates flip the median ({len(cases)} cases)", not bad,
                        f"fails at {bad}" if bad else "")]


def chi_square_sampler(cases, seed, count=1_000_000, alpha=1e-3):
    out = []
    for k, lam in cases:
        params = OrderKParams(k, lam)
        batch = oracle.sample(params, seed, count)
        stat, p = chi_square_against_table(batch)
        out.append(CheckResult(f"sampler chi-square k={k} lambda={lam}", p > alpha,
                               f"p={p:.3g}, stat={stat:.1f}"))
    return out


def chi_square_against_table(batch, min_expected=5.0):
    """Chi-square statistic and p-value of a sample against the recurrence pmf.

    Cells with small expected counts are pooled into neighbours; the last
    cell absorbs the upper tail.
    """
    params = batch.params
    table = dist_core.pmf_table(params, dist_core.support_bound(params))
    probs = table.probabilities
    counts = np.bincount(batch.values, minlength=len(probs)).astype(float)
    if len(counts) > len(probs):
        counts = np.concatenate([counts[: len(probs) - 1], [counts[len(probs) - 1:].sum()]])
    expected = probs * batch.count
    expected[-1] += max(batch.count - expected.sum(), 0.0)
    obs_cells, exp_cells = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(counts, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_cells.append(o_acc)
            exp_cells.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        obs_cells[-1] += o_acc
        exp_cells[-1] += e_acc
    obs = np.array(obs_cells)
    exp = np.array(exp_cells)
    exp *= obs.sum() / exp.sum()
    stat, p = stats.chisquare(obs, exp)
    return float(stat), float(p)


QUICK_PMF_GRID = [(1, 4.0), (2, 0.5), (3, 1.5), (5, 0.25), (5, 2.0), (8, 0.125)]
FULL_PMF_GRID = [(1, 0.5), (1, 20.0), (2, 0.5), (2, 10.0), (3, 0.1), (3, 6.5), (5, 0.25),
                 (5, 4.0), (8, 1.25), (13, 1.5), (20, 0.0625), (20, 0.5), (20, 1.0)]


def run(level="quick", seed=0, log=print):
    """Run the suite; returns the list of results after logging one line each."""
    if level == "quick":
        plan = [
            lambda: three_way_pmf(QUICK_PMF_GRID, 60),
            lambda: median_zero_boundary(100),
            lambda: median_formula(2, 12),
            lambda: mode_formula(2, 10),
            lambda: solver_boundaries([(5, 0), (10, 3), (20, 7), (20, 20), (20, 30)]),
        ]
    elif level == "full":
        plan = [
            lambda: three_way_pmf(FULL_PMF_GRID, 300),
            lambda: median_zero_boundary(100),
            lambda: median_formula(2, 40),
            lambda: mode_formula(2, 25),
            lambda: solver_boundaries([(k, nu) for k in (5, 20, 50) for nu in range(0, 2 * k + 1, 3)]),
            lambda: chi_square_sampler([(2, 0.5), (5, 2.0), (20, 0.1)], seed),
        ]
    else:
        raise ValueError(f"unknown level {level!r}")
    results = []
    for step in plan:
        t0 = time.perf_counter()
        batch = step()
        dt = (time.perf_counter() - t0) / max(1, len(batch))
        for r in batch:
            r.seconds = dt
            log(r.line())
        results.extend(batch)
    return results
