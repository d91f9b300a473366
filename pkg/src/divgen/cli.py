"""Command-line interface: ``divgen <subcommand> [options]``.

Results go to standard output as JSON (or to ``--out``), and a one-line
summary goes to standard error. Exit codes are 0 on success, 1 for
domain, precondition, numeric or resource errors, and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
import sympy as sp

from . import __version__
from .config import default_glf, parse_family
from .errors import DivgenError, UsageError

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------------------
# helpers


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _clean_float(float(obj))
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, sp.Basic):
        return str(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean_float(x):
    return x if math.isfinite(x) else None


def _clean(obj):
    if isinstance(obj, float):
        return _clean_float(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("DIVGEN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"DIVGEN_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _emit(args, result: dict, summary: str) -> int:
    record = {"schema_version": SCHEMA_VERSION, "command": args.command, "result": result}
    if getattr(args, "seed", None) is not None:
        record["seed"] = args.seed
    text = json.dumps(_clean(record), sort_keys=True, indent=2, default=_json_default) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not getattr(args, "quiet", False):
        print(summary, file=sys.stderr)
    return EXIT_OK


def _read_numbers(path: str) -> list[float]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise UsageError(f"cannot read data file {path}: {exc}") from None
    values = []
    for i, ln in enumerate(lines, 1):
        if not ln or ln.startswith("#"):
            continue
        try:
            values.append(float(ln))
        except ValueError:
            raise UsageError(f"{path}:{i}: not a number: {ln!r}") from None
    if not values:
        raise UsageError(f"{path}: no data")
    return values


def _family(args):
    fam, lam = parse_family(args.family, nu=getattr(args, "nu", None))
    return fam, lam


def _glf(args, fam):
    from .glf import GeneralizedLikelihood

    kind = args.glf or default_glf(fam)
    alpha = args.alpha if kind != "log" else None
    return GeneralizedLikelihood(kind, fam, alpha)


def _fmt_value(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, tuple):
        return [_fmt_value(x) for x in v]
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_divergence(args) -> int:
    from .divergences import DivergenceSpec

    g_fam, g_lam = parse_family(args.g)
    f_fam, f_lam = parse_family(args.f)
    if g_lam is None or f_lam is None:
        raise UsageError("--g and --f need a parameter value, e.g. bernoulli@0.3")
    spec = DivergenceSpec(args.kind, args.alpha if args.kind != "kl" else None, args.tol)
    g = _member(g_fam, g_lam)
    f = _member(f_fam, f_lam)
    value = spec(g, f)
    infinite = isinstance(value, float) and math.isinf(value)
    result = {
        "kind": args.kind,
        "alpha": spec.alpha,
        "g": args.g,
        "f": args.f,
        "value": None if infinite else float(value),
        "value_exact": str(value) if isinstance(value, Fraction) else None,
        "infinite": infinite,
    }
    return _emit(args, result, f"{args.kind} divergence = {value}")


def _member(fam, lam):
    from .families import FiniteDensity

    if fam.support.is_finite and isinstance(lam, Fraction) and fam.has_exact_pmf:
        from .deformed import to_fraction, to_sympy
        from .families import LAM

        probs = [to_fraction(fam.exact_pmf(v).subs(LAM, to_sympy(lam))) for v in fam.support.values]
        fam.check_param(float(lam))
        return FiniteDensity(fam.support.values, probs)
    return fam.at(float(lam))


def cmd_sufficiency(args) -> int:
    from .glf import factorization_check, parse_statistic, sufficiency_check

    fam, _ = _family(args)
    glf = _glf(args, fam)
    T = parse_statistic(args.statistic)
    grid = fam.grid(args.grid_points)
    suff = sufficiency_check(T, glf, grid, n=args.n, tol=args.tol)
    fact = factorization_check(T, glf, grid, n=args.n, tol=args.tol)
    result = {
        "family": fam.name,
        "glf": glf.kind.value,
        "alpha": glf.alpha,
        "statistic": T.name,
        "n": args.n,
        "grid": list(map(float, grid)),
        "sufficiency": suff.to_dict(),
        "factorization": fact.to_dict(),
    }
    verdict = "sufficient" if suff.sufficient else "not sufficient"
    return _emit(args, result, f"{T.name} is {verdict} for {fam.name} ({glf.kind.value}, n={args.n})")


def cmd_deform(args) -> int:
    from .deformed import build_deformed_finite
    from .glf import parse_statistic

    fam, _ = _family(args)
    glf = _glf(args, fam)
    dist = build_deformed_finite(fam, glf, args.n)
    grid = [float(x) for x in fam.grid(args.grid_points)]
    table = np.asarray([dist.pmf(lam) for lam in grid], dtype=float)
    rows = []
    for i, y in enumerate(dist.space):
        rows.append({
            "y": [_fmt_value(v) for v in y],
            "pmf": table[:, i].tolist(),
            "exact": str(dist.exact_pmf[i]) if dist.is_exact else None,
        })
    result = {"family": fam.name, "glf": glf.kind.value, "alpha": glf.alpha, "n": args.n,
              "grid": grid, "exact": dist.is_exact, "tuples": rows}
    if args.statistic:
        T = parse_statistic(args.statistic)
        pmf = dist.statistic_pmf(T)
        stat_rows = []
        for t in pmf.values:
            vals = [float(pmf(lam)[t]) for lam in grid]
            stat_rows.append({"t": _fmt_value(t), "pmf": vals,
                              "exact": str(pmf.exact[t]) if pmf.exact is not None else None})
        result["statistic"] = {"name": T.name, "values": stat_rows}
    return _emit(args, result, f"deformed distribution over {len(dist)} tuples (exact={dist.is_exact})")


def cmd_complete(args) -> int:
    from .completeness import completeness_check, completeness_grid_check
    from .deformed import build_deformed_finite
    from .glf import parse_statistic

    fam, _ = _family(args)
    glf = _glf(args, fam)
    dist = build_deformed_finite(fam, glf, args.n)
    T = parse_statistic(args.statistic)
    if args.method == "grid":
        report = completeness_grid_check(dist, T)
    else:
        report = completeness_check(dist, T)
    if args.emit_matrix:
        if report.matrix is None:
            raise UsageError("--emit-matrix needs the exact method")
        with open(args.emit_matrix, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["power"] + [f"t={_fmt_value(t)}" for t in report.values])
            for k, row in enumerate(report.matrix):
                writer.writerow([k] + [str(x) for x in row])
    result = {"family": fam.name, "glf": glf.kind.value, "alpha": glf.alpha, "n": args.n, **report.to_dict()}
    summary = f"{T.name}: {report.verdict}"
    if report.witness_vector is not None:
        summary += f", witness {report.witness_vector}"
    return _emit(args, result, summary)


def cmd_mdpde(args) -> int:
    from .estimators import SolverConfig, mdpde_solve

    fam, _ = _family(args)
    sample = _read_numbers(args.data)
    if fam.support.is_finite:
        sample = [int(v) if float(v).is_integer() else v for v in sample]
    report = mdpde_solve(sample, fam, args.alpha, SolverConfig(tol=args.tol, max_iter=args.max_iter))
    result = {"family": fam.name, "alpha": args.alpha if args.alpha is not None else fam.alpha,
              "n": len(sample), **report.to_dict()}
    status = "converged" if report.converged else "did not converge"
    return _emit(args, result, f"MDPDE = {report.estimate} ({status}, residual {report.residual:.3g})")


def _stress_estimator(kind: str, estimand: str, sigma: float, n: int):
    from .estimators import Estimator
    from .glf import mean_statistic
    from .numerics import norm_cdf

    if estimand == "mean":
        return Estimator(kind, mean_statistic, lambda t: np.asarray(t, dtype=float) * 1.0)
    if kind == "mdpde":
        c = math.sqrt(2.0) * sigma
        return Estimator("mdpde", mean_statistic, lambda t: norm_cdf(np.asarray(t, dtype=float) / c))
    k = math.sqrt(n / (2.0 * n - 1.0)) / sigma
    return Estimator("umvue", mean_statistic, lambda t: norm_cdf(k * np.asarray(t, dtype=float)))


def cmd_risk(args) -> int:
    from .deformed import build_deformed_student
    from .estimators import risk_evaluate
    from .stress import reliability

    if args.method == "mc" and args.seed is None:
        raise UsageError("--method mc needs --seed")
    dist = build_deformed_student(args.nu, args.mu, args.n)
    est = _stress_estimator(args.estimator, args.estimand, dist.sigma_star, args.n)
    estimand = (lambda mu: mu) if args.estimand == "mean" else (lambda mu: reliability(mu, dist.sigma_star))
    value = risk_evaluate(est, estimand, dist, args.mu, args.method, seed=args.seed, reps=args.reps)
    result = {"nu": args.nu, "mu": args.mu, "sigma_star": dist.sigma_star, "estimand": args.estimand,
              **value.to_dict()}
    return _emit(args, result, f"risk of {args.estimator} = {value.risk:.6g}")


def cmd_aed(args) -> int:
    from .aed import SmoothFunction, aed_balpha, curve_from_balpha
    from .stress import aed_closed_form, decide, StressStrengthModel
    from .families import sigma_star

    if args.sigma_star is not None:
        from .aed import NaturalParamCurve

        s = args.sigma_star
        curve = NaturalParamCurve(lambda mu: mu / s**2, lambda mu: 1 / s**2, lambda mu: 0.0, lambda mu: 0.0)
        nu = None
    else:
        fam, _ = _family(args)
        if not getattr(fam, "location", False) or not hasattr(fam, "nu"):
            raise UsageError("aed supports the Student location family (student:nu=V) or --sigma-star")
        nu = fam.nu
        s = sigma_star(nu)
        curve = curve_from_balpha(fam, component=1)
    if args.numeric:
        from .aed import NaturalParamCurve

        curve = NaturalParamCurve(curve.f)
    if args.estimand == "mean":
        tau = SmoothFunction(lambda mu: mu, lambda mu: 1.0, lambda mu: 0.0, lambda mu: 0.0)
    else:
        from .stress import _tau

        tau = _tau(s)
        if args.numeric:
            tau = SmoothFunction(tau.f)
    report = aed_balpha(tau, curve, args.mu)
    result = {"nu": nu, "mu": args.mu, "sigma_star": s, "estimand": args.estimand, **report.to_dict()}
    if args.estimand == "reliability":
        result["aed_closed_form"] = aed_closed_form(args.mu, s)
        result["decision"] = decide(StressStrengthModel(nu, args.mu, s)).to_dict()
    return _emit(args, result, f"AED = {report.aed:.6g}; preferred {report.preferred}")


def cmd_risk_fit(args) -> int:
    from .aed import risk_expansion_fit

    data = _read_csv_pairs(args.data)
    fit = risk_expansion_fit(data, min_n=args.min_n)
    result = fit.to_dict()
    if args.figure:
        from .plotting import plot_risk_fit

        plot_risk_fit(data, fit, args.figure)
        result["figure"] = args.figure
    return _emit(args, result, f"a = {fit.a:.6g}, b = {fit.b:.6g}, r = {fit.r:.4f}, s = {fit.s:.4f}")


def _read_csv_pairs(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    pairs = []
    for i, row in enumerate(rows, 1):
        if not row or row[0].strip().startswith("#"):
            continue
        try:
            pairs.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            if i == 1:
                continue  # header
            raise UsageError(f"{path}:{i}: expected 'n,risk'") from None
    return pairs


def cmd_stress(args) -> int:
    from .stress import StressStrengthModel, decide, estimators, risk_mdpde, risk_umvue

    model = StressStrengthModel.from_nu(args.nu, args.mu)
    result = {"decision": decide(model).to_dict()}
    if args.data:
        sample = _read_numbers(args.data)
        n = len(sample)
        ybar = float(np.mean(sample))
        mdpde, umvue = estimators(model, ybar, n)
        result["estimates"] = {"n": n, "ybar": ybar, "mdpde": mdpde, "umvue": umvue}
    if args.n:
        result["risks"] = {
            "n": args.n,
            "mdpde": risk_mdpde(args.mu, model.sigma_star, args.n),
            "umvue": risk_umvue(args.mu, model.sigma_star, args.n),
        }
    dec = result["decision"]
    return _emit(args, result, f"reliability {dec['reliability']:.6f}; preferred {dec['preferred']}")


def _parse_range(text: str) -> np.ndarray:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"--mu-range must be a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise UsageError("--mu-range needs step > 0 and a <= b")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


def cmd_stress_curve(args) -> int:
    from .stress import CURVE_COLUMNS, curve_rows, sigma_star, threshold

    mus = _parse_range(args.mu_range)
    s = sigma_star(args.nu)
    chunks = np.array_split(mus, min(_threads(args), len(mus)))
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda c: curve_rows(args.nu, c, s), chunks))
    rows = [r for part in parts for r in part]
    if args.figure:
        from .plotting import plot_stress_curve

        plot_stress_curve(rows, args.figure, title=f"nu = {args.nu:g}", threshold=threshold(s))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CURVE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        if not args.quiet:
            print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
        return EXIT_OK
    args.out = None
    return _emit(args, {"nu": args.nu, "sigma_star": s, "columns": list(CURVE_COLUMNS), "rows": rows,
                        "figure": args.figure}, f"{len(rows)} rows")


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", help="write the result here instead of standard output")
    p.add_argument("--threads", type=int, help="worker threads for grid sweeps (default: DIVGEN_THREADS or all cores)")
    p.add_argument("--seed", type=int, help="random seed; recorded in the output")
    p.add_argument("--quiet", action="store_true", help="suppress the summary on standard error")
    return p


def _finite_args(p, statistic_required=True):
    p.add_argument("--family", required=True, help="family spec, e.g. bernoulli-malpha or a YAML/JSON file")
    p.add_argument("--glf", choices=["log", "dpd", "ldpd", "dpd-sum"], help="generalized likelihood (default by family)")
    p.add_argument("--alpha", type=float, help="tuning parameter (default: the family's alpha)")
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--statistic", required=statistic_required, help="mean | sum | identity | constant | coordinate:i")
    p.add_argument("--nu", type=float, help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="divgen", description="Divergence-based generalized likelihood tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("divergence", parents=[common], help="KL / DPD / LDPD between two densities")
    p.add_argument("--kind", choices=["kl", "dpd", "ldpd"], required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--g", required=True, help="family@lam, e.g. bernoulli@0.3")
    p.add_argument("--f", required=True, help="family@lam")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("sufficiency", parents=[common], help="check generalized sufficiency of a statistic")
    _finite_args(p)
    p.add_argument("--grid-points", type=int, default=9)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_sufficiency)

    p = sub.add_parser("deform", parents=[common], help="tabulate the deformed distribution")
    _finite_args(p, statistic_required=False)
    p.add_argument("--grid-points", type=int, default=9)
    p.set_defaults(func=cmd_deform)

    p = sub.add_parser("complete", parents=[common], help="decide generalized completeness")
    _finite_args(p)
    p.add_argument("--method", choices=["exact", "grid"], default="exact")
    p.add_argument("--emit-matrix", metavar="CSV", help="write the coefficient matrix as CSV")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("mdpde", parents=[common], help="minimum DPD estimate from a data file")
    p.add_argument("--family", required=True, help="e.g. student:nu=3, or student with --nu")
    p.add_argument("--nu", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--data", required=True, help="newline-delimited numbers")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=100)
    p.set_defaults(func=cmd_mdpde)

    p = sub.add_parser("risk", parents=[common], help="deformed risk of the reliability estimators")
    p.add_argument("--estimator", choices=["mdpde", "umvue"], required=True)
    p.add_argument("--estimand", choices=["reliability", "mean"], default="reliability")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=["quad", "mc"], default="quad")
    p.add_argument("--reps", type=int, default=100_000)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("aed", parents=[common], help="asymptotic expected deficiency, MDPDE vs UMVUE")
    p.add_argument("--family", default="student")
    p.add_argument("--nu", type=float)
    p.add_argument("--sigma-star", type=float, help="synthetic sigma* instead of a family")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--estimand", choices=["reliability", "mean"], default="reliability")
    p.add_argument("--numeric", action="store_true", help="finite-difference derivatives only")
    p.set_defaults(func=cmd_aed)

    p = sub.add_parser("risk-fit", parents=[common], help="fit n R(n) = a + b/n")
    p.add_argument("--data", required=True, help="CSV with columns n,risk")
    p.add_argument("--min-n", type=int, default=20)
    p.add_argument("--figure", help="write a plot of the fit (format from the extension)")
    p.set_defaults(func=cmd_risk_fit)

    p = sub.add_parser("stress", parents=[common], help="stress-strength decision")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--data", help="strength sample, newline-delimited")
    p.set_defaults(func=cmd_stress)

    p = sub.add_parser("stress-curve", parents=[common], help="reliability and AED over a mu grid")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--mu-range", required=True, help="a:b:step")
    p.add_argument("--figure", help="write a plot of the curve (format from the extension)")
    p.set_defaults(func=cmd_stress_curve)
    return parser


def _join_range_values(argv: list[str]) -> list[str]:
    """``--mu-range -3:3:0.1`` would be read as a flag; glue the value on."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--mu-range" and i + 1 < len(argv):
            out.append(f"--mu-range={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_range_values(sys.argv[1:] if argv is None else list(argv))
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"divgen {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivgenError as exc:
        print(f"divgen {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
