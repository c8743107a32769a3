"""Command-line entry point: ``scaledmt <subcommand> [options]``.

Tables are written as CSV (to ``--out`` or stdout); a JSON summary echoing
the resolved configuration goes to stdout, or to stderr when the table
itself is on stdout.

Exit codes: 0 success, 2 input/data error, 3 parameter error, 4 solver
infeasibility.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotic import AsymptoticProblem, optimal_gamma
from .core import (
    DataError,
    MixtureModel,
    NoSolutionError,
    ScaledMTError,
    ScalingFunction,
    build_thresholds,
)
from .estimation import estimated_optimal_gamma, pvalues_to_z
from .exact import power_exact, rejection_count_pmf, sev_exact, sfdp_cdf, sfdp_moment
from .optimality import figure1_data, optimal_cv, peak_lambda
from .procedures import step_up
from .simulation import DEFAULT_LAMBDAS, Scenario, run_grid, worker_count

EXIT_OK, EXIT_DATA, EXIT_PARAM, EXIT_INFEASIBLE = 0, 2, 3, 4


class InputError(Exception):
    """Unreadable or malformed input file."""


class ParameterError(Exception):
    """Invalid command-line parameter."""


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _key(x) -> str:
    return repr(float(x))


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def read_column(path, names) -> tuple[str, np.ndarray]:
    """Read one numeric column from a headed CSV; ``names`` are accepted headers."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    col = next((h for h in names if h in header), None)
    if col is None:
        raise InputError(f"{path}: header must contain one of {', '.join(names)}")
    j = header.index(col)
    vals, bad = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            vals.append(float(row[j]))
        except (IndexError, ValueError):
            bad.append(lineno)
    if bad:
        raise InputError(f"{path}: malformed value on row(s) {', '.join(map(str, bad[:10]))}")
    if not vals:
        raise InputError(f"{path}: no data rows")
    return col, np.asarray(vals)


def read_table(path, columns) -> dict:
    return {c: read_column(path, [c])[1] for c in columns}


def write_table(rows, header, out):
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])
    finally:
        if out:
            fh.close()


def emit_summary(summary: dict, args):
    stream = sys.stdout if (args.out or args.format == "json") else sys.stderr
    json.dump(_jsonable(summary), stream, indent=2, sort_keys=True)
    stream.write("\n")


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _check_alpha(a):
    if not 0 < a < 1:
        raise ParameterError(f"--alpha must lie in (0, 1), got {a}")


def _scaling(args) -> ScalingFunction:
    if getattr(args, "scaling_file", None):
        _, vals = read_column(args.scaling_file, ["s", "scaling", "value"])
        try:
            return ScalingFunction.table(vals)
        except ScaledMTError as exc:
            raise ParameterError(str(exc)) from exc
    g = args.gamma
    if not 0 <= g <= 1:
        raise ParameterError(f"--gamma must lie in [0, 1], got {g}")
    return ScalingFunction.power(g)


def _counts(args) -> tuple[int, float]:
    m = args.m
    if m is None or m < 1:
        raise ParameterError("--m must be a positive integer")
    given = [x is not None for x in (args.m0, args.m1, getattr(args, "pi0", None))]
    if sum(given) != 1:
        raise ParameterError("give exactly one of --m0, --m1, --pi0")
    if args.m0 is not None:
        m0 = args.m0
    elif args.m1 is not None:
        m0 = m - args.m1
    else:
        if not 0 <= args.pi0 <= 1:
            raise ParameterError("--pi0 must lie in [0, 1]")
        return m, args.pi0 * m
    if not 0 <= m0 <= m:
        raise ParameterError("need 0 <= m0 <= m")
    return m, float(m0)


# reject ---------------------------------------------------------------------


def run_reject(args) -> int:
    _check_alpha(args.alpha)
    s = _scaling(args)
    if not args.input:
        raise ParameterError("--in is required")
    _, p = read_column(args.input, ["pvalue"])
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        bad = np.nonzero(np.isnan(p) | (p < 0) | (p > 1))[0] + 2
        raise InputError(f"p-values outside [0, 1] on row(s) {', '.join(map(str, bad[:10]))}")
    try:
        t = build_thresholds(s, p.size, args.alpha)
    except ScaledMTError as exc:
        raise ParameterError(str(exc)) from exc
    out = step_up(p, t)
    mask = np.zeros(p.size, dtype=int)
    mask[out.rejected] = 1
    write_table(
        ((i + 1, p[i], int(mask[i])) for i in range(p.size)),
        ["index", "pvalue", "rejected"],
        args.out,
    )
    emit_summary(
        {
            "m": p.size,
            "R": out.R,
            "t_R": out.threshold,
            "alpha": args.alpha,
            "scaling": s.describe(),
            "config": _config(args),
        },
        args,
    )
    return EXIT_OK


# exact ----------------------------------------------------------------------


def _model(args) -> MixtureModel:
    m, m0 = _counts(args)
    try:
        if args.f1_file:
            tab = read_table(args.f1_file, ["u", "F1"])
            return MixtureModel.from_table(m, m0 / m, tab["u"], tab["F1"])
        if args.delta is None or args.delta < 0:
            raise ParameterError("--delta must be given and >= 0 (or use --f1-file)")
        return MixtureModel(m, m0 / m, delta=args.delta)
    except ScaledMTError as exc:
        raise ParameterError(str(exc)) from exc


def exact_quantity(args):
    """Evaluate the quantity requested on the ``exact`` command line.

    Returns (name, value, pmf) where pmf is P(R = r), r = 0..m.
    """
    _check_alpha(args.alpha)
    model = _model(args)
    s = _scaling(args)
    try:
        t = build_thresholds(s, model.m, args.alpha)
        pmf = rejection_count_pmf(model, t)
        if args.cdf is not None:
            return "cdf", sfdp_cdf(model, t, s, args.cdf), pmf
        if args.moment is not None:
            return "moment", sfdp_moment(model, t, s, args.moment), pmf
        if args.sev:
            return "sev", sev_exact(model, t, s), pmf
        return "power", power_exact(model, t), pmf
    except ScaledMTError as exc:
        raise ParameterError(str(exc)) from exc


def run_exact(args) -> int:
    name, value, pmf = exact_quantity(args)
    if args.format == "csv":
        write_table(((r, pr) for r, pr in enumerate(pmf)), ["r", "prob"], args.out)
    emit_summary(
        {"quantity": name, "value": value, "pmf": pmf, "config": _config(args)}, args
    )
    return EXIT_OK


# optimal-gamma -----------------------------------------------------------------


def _lambda_list(args):
    if args.grid:
        return list(DEFAULT_LAMBDAS) if args.lambdas is None else args.lambdas
    return [args.lam]


def _solution_record(lam, sol, fallback, method) -> dict:
    """JSON record of one solve.

    ``residuals`` holds the equations the chosen method actually solves:
    the cut-off equation always, the stationarity equation only for
    ``method="system"``.  The latter is reported as a diagnostic otherwise.
    """
    residuals = {"cutoff": sol.residual_cutoff}
    if method == "system" and sol.mode == "stationary":
        residuals["stationarity"] = sol.residual_stationarity
    return {
        "lambda": lam,
        "gamma_star": sol.gamma,
        "u_star": sol.u,
        "solution_mode": sol.mode,
        "residuals": residuals,
        "stationarity_diagnostic": sol.residual_stationarity,
        "loss": sol.loss,
        "fallback": fallback,
    }


def run_optimal_gamma(args) -> int:
    _check_alpha(args.alpha)
    lams = _lambda_list(args)
    if any(l < 1 for l in lams):
        raise ParameterError("--lambda must be >= 1")
    results = []
    if args.estimate:
        if not args.input:
            raise ParameterError("--estimate needs --in")
        col, x = read_column(args.input, ["pvalue", "z"])
        try:
            z = pvalues_to_z(x) if col == "pvalue" else x
        except ScaledMTError as exc:
            raise InputError(str(exc)) from exc
        for lam in lams:
            try:
                est = estimated_optimal_gamma(args.alpha, lam, zscores=z)
            except ScaledMTError as exc:
                raise InputError(str(exc)) from exc
            if est.solution is None:
                results.append(
                    {
                        "lambda": lam,
                        "gamma_star": est.gamma,
                        "u_star": None,
                        "solution_mode": "fallback",
                        "residuals": {},
                        "fallback": True,
                    }
                )
            else:
                results.append(_solution_record(lam, est.solution, est.fallback, "loss"))
        mode = "em-estimated"
        extra = {
            "pi0_hat": est.fit.pi0,
            "delta_hat": est.fit.delta,
            "m0_hat": est.fit.m0(z.size),
            "em_iterations": est.fit.iterations,
            "em_converged": est.fit.converged,
            "em_degenerate": est.fit.degenerate,
        }
    else:
        m, m0 = _counts(args)
        if args.delta is None or args.delta < 0:
            raise ParameterError("--delta must be given and >= 0")
        for lam in lams:
            try:
                problem = AsymptoticProblem.gaussian(m, int(round(m0)), args.delta, args.alpha, lam)
                sol = optimal_gamma(problem, method=args.method)
            except NoSolutionError as exc:
                print(f"infeasible: {exc}", file=sys.stderr)
                return EXIT_INFEASIBLE
            except ScaledMTError as exc:
                raise ParameterError(str(exc)) from exc
            results.append(_solution_record(lam, sol, False, args.method))
        mode = "known-parameters"
        extra = {}
    if args.grid and args.out:
        write_table(
            ((r["lambda"], r["gamma_star"]) for r in results), ["lambda", "gamma_star"], args.out
        )
    summary = dict(results[0]) if len(results) == 1 else {"curve": results}
    summary.update(extra)
    summary["mode"] = mode
    summary["config"] = _config(args)
    args.format = "json"
    emit_summary(summary, args)
    return EXIT_OK


# simulate ----------------------------------------------------------------------


SIM_HEADER = [
    "gamma", "lambda", "mean_loss", "se_loss", "mean_V", "mean_T",
    "sev_hat", "fdr_hat", "power_hat",
]


def simulation_rows(result):
    loss, se = result.mean_loss, result.se_loss
    mv, mt, pw = result.mean_V, result.mean_T, result.power
    for k, g in enumerate(result.gammas):
        rates = result.rates(k) if result.n >= 2 else None
        sev = rates.sev if rates else float(result.V[0, k] / max(result.R[0, k], 1) ** g)
        fdr = rates.fdr if rates else float(result.V[0, k] / max(result.R[0, k], 1))
        for j, lam in enumerate(result.lambdas):
            yield (g, lam, loss[k, j], se[k, j], mv[k], mt[k], sev, fdr, pw[k])


def run_simulate(args) -> int:
    _check_alpha(args.alpha)
    if args.m is None or args.m1 is None or args.delta is None:
        raise ParameterError("--m, --m1 and --delta are required")
    if not 0 < args.gamma_step <= 1:
        raise ParameterError("--gamma-step must lie in (0, 1]")
    n_g = int(round(1.0 / args.gamma_step))
    gammas = tuple(np.round(np.linspace(0.0, 1.0, n_g + 1), 10))
    lams = tuple(DEFAULT_LAMBDAS if args.lambdas is None else args.lambdas)
    try:
        sc = Scenario(
            m=args.m, m1=args.m1, delta=args.delta, alpha=args.alpha,
            lambdas=lams, gammas=gammas, replications=args.reps, seed=args.seed,
        )
    except ScaledMTError as exc:
        raise ParameterError(str(exc)) from exc
    threads = worker_count(args.threads)
    res = run_grid(sc, threads=threads)
    write_table(simulation_rows(res), SIM_HEADER, args.out)
    emit_summary(
        {
            "argmin_gamma": dict(zip(map(_key, res.lambdas), res.argmin_gamma)),
            "fwer_hat": dict(zip(map(_key, res.gammas), res.fwer)),
            "config": _config(args) | {"threads": threads, "gammas": gammas, "lambdas": lams},
        },
        args,
    )
    return EXIT_OK


# model-case --------------------------------------------------------------------


def run_model_case(args) -> int:
    alphas = args.alpha_list
    for a in alphas:
        _check_alpha(a)
    if not (0 < args.delta_min <= args.delta_max and args.delta_step > 0):
        raise ParameterError("need 0 < --delta-min <= --delta-max and --delta-step > 0")
    n = int(math.floor((args.delta_max - args.delta_min) / args.delta_step + 1e-9)) + 1
    deltas = np.round(args.delta_min + args.delta_step * np.arange(n), 12)
    if args.lam is not None:
        if args.lam < 1:
            raise ParameterError("--lambda must be >= 1")
        rows = ((d, args.lam, optimal_cv(d, args.lam)) for d in deltas)
        write_table(rows, ["delta", "lambda", "cv_opt"], args.out)
    else:
        tab = figure1_data(alphas, deltas)
        write_table(((r["alpha"], r["delta"], r["lam"]) for r in tab), ["alpha", "delta", "lambda"], args.out)
    emit_summary(
        {"peak_lambda": {_key(a): peak_lambda(a) for a in alphas}, "config": _config(args)}, args
    )
    return EXIT_OK


# parser ------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Reports malformed options as parameter errors (exit 3), not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scaledmt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scaling=True):
        p.add_argument("--alpha", type=float, default=0.05)
        if scaling:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--gamma", type=float, default=1.0, help="exponent of s(r) = r^gamma")
            g.add_argument("--scaling-file", help="CSV with column 's' holding s(1..m)")
        p.add_argument("--out", help="CSV output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def counts(p, pi0=False):
        p.add_argument("--m", type=int)
        g = p.add_mutually_exclusive_group()
        g.add_argument("--m0", type=int)
        g.add_argument("--m1", type=int)
        if pi0:
            g.add_argument("--pi0", type=float)

    p = sub.add_parser("reject", help="run the step-up procedure on a p-value file")
    common(p)
    p.add_argument("--in", dest="input", help="CSV with a 'pvalue' column")
    p.set_defaults(func=run_reject)

    p = sub.add_parser("exact", help="exact SFDP cdf, moments, SEV or power")
    common(p)
    counts(p, pi0=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--f1-file", help="CSV with columns u,F1 tabulating the alternative cdf")
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--cdf", type=float, metavar="X", help="P(SFDP <= X)")
    q.add_argument("--x", dest="cdf", type=float, help=argparse.SUPPRESS)
    q.add_argument("--moment", "--kappa", dest="moment", type=int, metavar="KAPPA")
    q.add_argument("--sev", action="store_true")
    q.add_argument("--power", action="store_true")
    p.set_defaults(func=run_exact)

    p = sub.add_parser("optimal-gamma", help="asymptotically optimal gamma for a price lambda")
    common(p, scaling=False)
    counts(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--lambdas", type=_float_list, help="lambda grid used with --grid")
    p.add_argument("--grid", action="store_true", help="solve over a lambda grid")
    p.add_argument("--estimate", action="store_true", help="estimate m0 and delta by EM from --in")
    p.add_argument("--in", dest="input", help="CSV with a 'pvalue' or 'z' column")
    p.add_argument("--method", choices=("loss", "system"), default="loss")
    p.set_defaults(func=run_optimal_gamma)

    p = sub.add_parser("simulate", help="Monte Carlo loss curves over a gamma grid")
    common(p, scaling=False)
    counts(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma-step", type=float, default=0.02)
    p.add_argument("--lambdas", type=_float_list)
    p.add_argument("--threads", type=int, help="worker threads (default $SCALEDMT_THREADS or all cores)")
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("model-case", help="price of a false positive versus effect size")
    p.add_argument("--alpha", dest="alpha_list", type=_float_list, default=[0.01, 0.05])
    p.add_argument("--delta-min", type=float, default=0.1)
    p.add_argument("--delta-max", type=float, default=5.0)
    p.add_argument("--delta-step", type=float, default=0.01)
    p.add_argument("--lambda", dest="lam", type=float, help="emit (delta, lambda, cv_opt) instead")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=run_model_case)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ParameterError, ScaledMTError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
