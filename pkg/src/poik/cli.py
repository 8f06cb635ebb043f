"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import asdict

from poik import dist_core, verify
from poik.dist_core import OrderKParams
from poik.errors import PoikError
from poik.median_solver import solve_lambda_star, verify_boundary
from poik import scaling_fit as sf

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_SEED = 20231009


class UsageError(Exception):
    pass


def parse_k_list(text: str) -> list:
    """``"100,200"`` or ``"2:100"`` (inclusive range) or a mix of both."""
    ks = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            lo, hi = (int(x) for x in part.split(":", 1))
            ks.extend(range(lo, hi + 1))
        else:
            ks.append(int(part))
    if not ks or min(ks) < 1:
        raise UsageError(f"--k-list must name integers >= 1, got {text!r}")
    return ks


def fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


@contextmanager
def open_output(path):
    """Yield a text stream; files are written atomically and removed on error."""
    if path in (None, "-"):
        yield sys.stdout
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".poik-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rows(columns, rows, path, fmt_name="csv"):
    with open_output(path) as fh:
        if fmt_name == "json":
            json.dump([dict(zip(columns, r)) for r in rows], fh)
            fh.write("\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([fmt(v) for v in r])


def read_rows(text, fmt_name="csv"):
    """Parse output of :func:`write_rows` back into dicts of numbers."""
    if fmt_name == "json":
        return json.loads(text)
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append({k: (int(v) if v.lstrip("-").isdigit() else float(v)) for k, v in row.items()})
    return out


def emit_json(obj):
    json.dump(obj, sys.stdout)
    sys.stdout.write("\n")


def _params(args):
    return OrderKParams(args.k, args.lam)


def cmd_pmf(args):
    params = _params(args)
    if args.n_max < 0:
        raise UsageError("--n-max must be >= 0")
    table = dist_core.pmf_table(params, args.n_max)
    rows = [(n, table.pmf(n), dist_core.cdf(table, n)) for n in range(args.n_max + 1)]
    write_rows(("n", "p_n", "cdf_n"), rows, args.output, args.format)
    return EXIT_OK


def cmd_median(args):
    params = _params(args)
    emit_json({"k": params.k, "lambda": params.lam, "median": dist_core.median(params)})
    return EXIT_OK


def cmd_mode(args):
    params = _params(args)
    ms = dist_core.mode(params)
    emit_json({"k": params.k, "lambda": params.lam, "modes": list(ms.modes),
               "peak_probability": ms.peak_probability})
    return EXIT_OK


def cmd_solve_lambda(args):
    if args.k < 1 or args.nu < 0:
        raise UsageError("need --k >= 1 and --nu >= 0")
    result = solve_lambda_star(args.k, args.nu)
    out = result.to_dict()
    out["verify_boundary"] = verify_boundary(result)
    emit_json(out)
    return EXIT_OK


SWEEP_COLUMNS = ("k", "n", "median", "base_median", "scaled_diff", "scaled_mean")


def _record_rows(records):
    return [tuple(asdict(r)[c] for c in SWEEP_COLUMNS) for r in records]


def cmd_sweep(args):
    if args.k is None and not args.k_list:
        raise UsageError("sweep needs --k or --k-list")
    ks = parse_k_list(args.k_list) if args.k_list else [args.k]
    if args.nu is not None:
        rows = [(k, nu, mu) for k in ks for nu, mu in sf.sweep_nu_mu(k, args.nu)]
        write_rows(("k", "nu", "mu_star"), rows, args.output, args.format)
        return EXIT_OK
    rows = []
    for k in ks:
        recs = sf.sweep_base_median_diff(k, args.n_lo, args.n_hi, step=args.step, jobs=args.jobs)
        rows.extend(_record_rows(recs))
    write_rows(SWEEP_COLUMNS, rows, args.output, args.format)
    return EXIT_OK


def cmd_fit_delta(args):
    top = 10000 if args.full_scale else 2000
    ks = parse_k_list(args.k_list) if args.k_list else list(range(2, top + 1))
    samples = sf.delta_samples(ks, jobs=args.jobs)
    fit = sf.fit_delta_k(samples)
    ours = sf.residual_report(fit, samples, "delta_k")
    ref = sf.residual_report(sf.REFERENCE_DELTA_FIT, samples, "delta_k")
    emit_json({
        "k_min": min(ks), "k_max": max(ks), "samples": len(ks),
        "fit": asdict(fit),
        "residual": {"max_abs": ours.max_abs, "bias": ours.bias},
        "reference_residual": {"max_abs": ref.max_abs, "bias": ref.bias},
    })
    return EXIT_OK


def cmd_fit_series(args):
    ks = parse_k_list(args.k_list) if args.k_list else list(sf.DEFAULT_SERIES_KS)
    samples = sf.series_samples(ks, args.points, jobs=args.jobs)
    fit = sf.fit_mu_series(samples, weighting=args.weighting)
    ours = sf.residual_report(fit, samples, "mu_series")
    ref = sf.residual_report(sf.REFERENCE_SERIES_FIT, samples, "mu_series")
    emit_json({
        "k_list": ks, "points": args.points, "weighting": args.weighting,
        "fit": {"a0": fit.a0, "a1": list(fit.a1), "a2": list(fit.a2), "a3": list(fit.a3)},
        "residual": {"max_abs": ours.max_abs, "bias": ours.bias},
        "reference_residual": {"max_abs": ref.max_abs, "bias": ref.bias},
    })
    return EXIT_OK


def figure_data(fig_id, k_list=None, full_scale=False, jobs=1, k=None):
    """Columns and rows behind figure ``fig_id`` (1-9)."""
    if fig_id == 1:
        k = k or 20
        rows = []
        for nu in range(2 * k + 1):
            r = solve_lambda_star(k, nu)
            rows.append((k, nu, r.lambda_star, r.mu_star))
        return ("k", "nu", "lambda_star", "mu_star"), rows
    if fig_id in (2, 3, 4):
        top = 100 if fig_id == 2 else (10000 if full_scale else 2000)
        ks = k_list or list(range(2, top + 1))
        samples = sf.delta_samples(ks, jobs=jobs)
        if fig_id == 2:
            return ("k", "lambda_star"), [(k, mu / (k * (k + 1) // 2)) for k, mu in samples]
        if fig_id == 3:
            return ("k", "mu_star"), samples
        rows = []
        for k, mu in samples:
            d = sf.delta_k_eval(sf.REFERENCE_DELTA_FIT, k)
            rows.append((k, mu, d, mu - k - d))
        return ("k", "mu_star", "delta_k", "residual"), rows
    if fig_id in (5, 6):
        ks = k_list or list(sf.DEFAULT_SERIES_KS)
        pairs = [(k, nu) for k in ks for nu in range(k + 1)]
        mus = sf.parallel_map(sf._boundary_mu, pairs, jobs)
        rows = []
        for (k, nu), mu in zip(pairs, mus):
            if fig_id == 5:
                rows.append((k, nu, nu / k, mu, mu / (k + 1)))
            else:
                pred = sf.mu_series_eval(sf.REFERENCE_SERIES_FIT, k, nu)
                rows.append((k, nu, nu / k, (mu - pred) / (k + 1)))
        cols = ("k", "nu", "nu_over_k", "mu_star", "mu_scaled") if fig_id == 5 else \
            ("k", "nu", "nu_over_k", "residual")
        return cols, rows
    if fig_id in (7, 8, 9):
        if fig_id == 7:
            ks, span, points = k_list or [100, 200, 300, 400, 500], 10, None
        else:
            default = [1000, 2000, 5000, 10000] if full_scale else [1000, 2000]
            ks, span, points = k_list or default, (20 if fig_id == 8 else 5), 400
        rows = []
        for k in ks:
            n_lo, n_hi = sf.default_n_lo(k), span * k
            step = 1 if points is None else max(1, (n_hi - n_lo) // points)
            rows.extend(_record_rows(sf.sweep_base_median_diff(k, n_lo, n_hi, step=step, jobs=jobs)))
        return SWEEP_COLUMNS, rows
    raise UsageError(f"figure id must be 1..9, got {fig_id}")


def cmd_figure(args):
    if not 1 <= args.id <= 9:
        raise UsageError(f"figure id must be 1..9, got {args.id}")
    k_list = parse_k_list(args.k_list) if args.k_list else None
    cols, rows = figure_data(args.id, k_list, args.full_scale, args.jobs, args.k)
    output = args.output or f"figure{args.id}.{args.format}"
    write_rows(cols, rows, output, args.format)
    return EXIT_OK


def cmd_verify(args):
    results = verify.run(args.level, seed=args.seed)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="poik", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *names):
        if "k" in names:
            sp.add_argument("--k", type=int, required=True)
        if "lambda" in names:
            sp.add_argument("--lambda", dest="lam", type=float, required=True)
        if "output" in names:
            sp.add_argument("--output", default=None, help="file path, '-' for stdout")
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if "jobs" in names:
            sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    sp = sub.add_parser("pmf", help="p_n and P(Y<=n) for n = 0..n_max")
    common(sp, "k", "lambda", "output")
    sp.add_argument("--n-max", type=int, required=True)
    sp.set_defaults(func=cmd_pmf)

    sp = sub.add_parser("median", help="median as JSON")
    common(sp, "k", "lambda")
    sp.set_defaults(func=cmd_median)

    sp = sub.add_parser("mode", help="mode set as JSON")
    common(sp, "k", "lambda")
    sp.set_defaults(func=cmd_mode)

    sp = sub.add_parser("solve-lambda", help="rate at which P(Y<=nu) = 1/2")
    common(sp, "k")
    sp.add_argument("--nu", type=int, required=True)
    sp.set_defaults(func=cmd_solve_lambda)

    sp = sub.add_parser("sweep", help="base-median sweep over integer means, or nu->mu with --nu")
    sp.add_argument("--k", type=int)
    sp.add_argument("--k-list")
    sp.add_argument("--nu", type=int, help="tabulate boundary means for nu = 0..NU instead")
    sp.add_argument("--n-lo", type=int)
    sp.add_argument("--n-hi", type=int)
    sp.add_argument("--step", type=int, default=1)
    common(sp, "output", "jobs")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit-delta", help="fit mu - k at the nu = k boundary")
    sp.add_argument("--k-list")
    sp.add_argument("--full-scale", action="store_true", help="use k = 2..10000")
    common(sp, "jobs")
    sp.set_defaults(func=cmd_fit_delta)

    sp = sub.add_parser("fit-series", help="fit mu/(k+1) as a cubic in nu/k")
    sp.add_argument("--k-list")
    sp.add_argument("--points", type=int, default=sf.DEFAULT_SERIES_POINTS)
    sp.add_argument("--weighting", choices=("relative", "uniform"), default="relative")
    common(sp, "jobs")
    sp.set_defaults(func=cmd_fit_series)

    sp = sub.add_parser("figure", help="data series behind figure 1-9")
    sp.add_argument("id", type=int)
    sp.add_argument("--k", type=int, help="order for figure 1 (default 20)")
    sp.add_argument("--k-list")
    sp.add_argument("--full-scale", action="store_true")
    common(sp, "output", "jobs")
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("verify", help="run the self-check suite")
    sp.add_argument("level", nargs="?", choices=("quick", "full"), default="quick")
    sp.add_argument("--seed", type=int, default=int(os.environ.get("POIK_SEED", DEFAULT_SEED)))
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, PoikError, ValueError) as exc:
        print(f"poik {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
