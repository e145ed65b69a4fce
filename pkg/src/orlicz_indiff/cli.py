"""Command-line front end: ``orlicz-indiff {price,maximize,dual,example,verify,norm}``.

Reports go to stdout (or ``--out FILE``) as an aligned table, or as JSON
with ``--json``.  Exit codes: 0 ok, 1 a verification check failed,
2 invalid input, 3 a solver did not converge.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import exp_mixture as em
from .dual import minimize_dual
from .indifference import price_exponential, price_report, subdifferential_residual
from .io import load_exp_mixture, load_json, load_market, load_utility
from .market import MarketValidationError, martingale_polytope
from .primal import ConvergenceError, maximize
from .utility import DiscreteDistribution, exponential_utility, luxemburg_norm, orlicz_dual_norm
from .verification import DEFAULT_SEED, SUITES, example_alpha, run_suites

EXIT_OK, EXIT_SUITE, EXIT_VALIDATION, EXIT_CONVERGENCE = 0, 1, 2, 3
SEED_ENV = "ORLICZ_INDIFF_SEED"


class UsageError(MarketValidationError):
    code = "invalid-arguments"


# --------------------------------------------------------------------------
# formatting


def _clean(obj):
    """Turn numpy types and non-finite floats into JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.15g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _table(report: dict, indent: int = 0) -> list:
    lines = []
    width = max((len(k) for k in report), default=0)
    pad = " " * indent
    for key, val in report.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines += _table(val, indent + 2)
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            lines.append(f"{pad}{key}:")
            for i, row in enumerate(val):
                lines.append(f"{pad}  [{i}]")
                lines += _table(row, indent + 4)
        else:
            lines.append(f"{pad}{key.ljust(width)}  {_fmt(val)}")
    return lines


def _emit(report: dict, args, lines: Optional[list] = None) -> None:
    """Write JSON with ``--json``, otherwise ``lines`` or the generic table."""
    report = _clean(report)
    if args.json:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        text = "\n".join(lines if lines is not None else _table(report)) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# argument helpers


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")
    return DEFAULT_SEED


def _utility(args):
    if args.utility == "exponential":
        if not args.gamma > 0:
            raise UsageError("--gamma must be positive")
        return exponential_utility(args.gamma)
    if not args.spec:
        raise UsageError("--utility custom needs --spec FILE")
    return load_utility(args.spec)


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError:
        raise UsageError(f"cannot read numbers from {text!r}")


def _claim(args, m):
    if args.claim_const is not None:
        return np.full(m.n_states, float(args.claim_const))
    if args.claim is not None:
        return _floats(args.claim)
    if args.claim_file is not None:
        data = load_json(args.claim_file)
        if isinstance(data, dict):
            data = data.get("claim")
        return np.asarray(data, dtype=float)
    if m.claim is not None:
        return m.claim
    return np.zeros(m.n_states)


def _market_inputs(args):
    m = load_market(args.market)
    u = _utility(args)
    B = _claim(args, m)
    if B.shape != (m.n_states,):
        raise UsageError(f"claim has {B.size} entries, market has {m.n_states} states")
    x = m.x0 if args.x0 is None else float(args.x0)
    return m, u, B, x


# --------------------------------------------------------------------------
# commands


def cmd_price(args) -> int:
    m, u, B, x = _market_inputs(args)
    rng = np.random.default_rng(_seed(args))
    rep = price_report(m, u, B, x, n_samples=args.samples, rng=rng)
    residuals = {
        "subdifferential": max(
            (subdifferential_residual(m, u, B, x, rep.price, q) for q in rep.argmax_measures), default=0.0
        ),
        "bounds_violation": max(0.0, rep.lower_bound - rep.price, rep.price - rep.upper_bound - 1e-9),
    }
    if u.kind == "exponential":
        residuals["closed_form_gap"] = abs(price_exponential(m, u.gamma, B, x) - rep.price)
    report = {
        "command": "price",
        "price": rep.price,
        "replicable": rep.replicable,
        "bounds": {"lower": rep.lower_bound, "upper": rep.upper_bound},
        "slopes": {"at_zero": rep.slope_at_zero, "at_infinity": rep.slope_at_infinity},
        "argmax_measures": [q.q for q in rep.argmax_measures],
        "penalty_table": [{"q": q.q, "alpha": a} for q, a in rep.penalty_at],
        "residuals": residuals,
    }
    _emit(report, args)
    return EXIT_OK


def cmd_maximize(args) -> int:
    m, u, B, x = _market_inputs(args)
    sol = maximize(m, u, B, x)
    _emit({
        "command": "maximize",
        "h_star": sol.h_star,
        "value": sol.value,
        "f_B": sol.f_B,
        "gradient_residual": sol.gradient_residual,
        "iterations": sol.iterations,
        "unique": sol.unique,
        "loss_multiple": sol.loss_multiple,
    }, args)
    return EXIT_OK


def cmd_dual(args) -> int:
    m, u, B, x = _market_inputs(args)
    sol = minimize_dual(m, u, B, x, tol=args.tol)
    _emit({
        "command": "dual",
        "lambda_star": sol.lambda_star,
        "q_star": sol.q_star.q,
        "value": sol.value,
        "lambda_foc_residual": sol.foc_lambda_residual,
        "q_variational_residual": sol.foc_q_residual,
        "f_B_recovered": sol.f_B_recovered,
        "duality_gap": sol.duality_gap,
        "iterations": sol.iterations,
        "polytope_vertices": len(martingale_polytope(m).vertices()) if m.n_states <= 10 else "skipped",
    }, args)
    return EXIT_OK


def _example_markets(args):
    if args.spec:
        with_claim = load_exp_mixture(args.spec)
        return with_claim, with_claim.with_claim(em.ZeroClaim())
    z, p = em.default_atoms(args.N, args.p1, args.r)
    if args.which == 2:
        claim = em.DeltaYClaim(args.delta)
    elif args.alpha_scale == 0:
        claim = em.BoundedAlphaClaim.constant_value(0.0)
    else:
        claim = example_alpha(args.alpha_scale)
    with_claim = em.ExpMixtureMarket(z, p, args.gamma, claim)
    return with_claim, with_claim.with_claim(em.ZeroClaim())


def _claim_label(claim) -> str:
    if isinstance(claim, em.DeltaYClaim):
        return f"B = {claim.delta:g} * Y"
    if isinstance(claim, em.BoundedAlphaClaim):
        return "B = alpha(Y, Z), bounded by %g" % claim.bound
    return "B = 0"


def cmd_example(args) -> int:
    try:
        m, base = _example_markets(args)
    except em.MonotonicityError as exc:
        _emit({"command": "example", "error": exc.code, "message": str(exc)}, args)
        return EXIT_CONVERGENCE
    opt = em.optimal_h(m)
    dens = em.dual_regular_density(m)
    mass_formula = em.singular_mass(m, "formula")
    mass_quad = em.singular_mass(m, "quadrature")
    bounds = em.singular_bounds(m)
    hedge = em.hedging_delta(m, base)
    cov = em.claim_stock_covariance(m)
    h_right = m.h_interval[1]
    f_desc = f"f_B = {opt.h_star:.15g} * S1"
    checks = {
        "h_star_at_right_end": opt.attained_at_boundary and abs(opt.h_star - h_right) <= 1e-15,
        "slope_positive_at_h_star": em.g_prime(m, opt.h_star) > 0,
        "singular_mass_positive": mass_formula > 0,
        "mass_routes_agree": abs(mass_formula - mass_quad) <= 1e-8 * abs(mass_formula),
        "regular_density_total_mass_one": abs(dens.total_mass() - 1.0) <= 1e-12,
    }
    if isinstance(m.claim, em.DeltaYClaim):
        checks["excess_hedge_is_minus_delta"] = abs(hedge + m.claim.delta) <= 1e-12
        checks["covariance_positive_while_hedge_negative"] = cov > 0 and hedge < 0
    else:
        checks["no_hedge"] = abs(hedge) <= 1e-10
        checks["bounded_claim_singular_action_zero"] = bounds.claim_action_zero
    report = {
        "command": "example",
        "which": args.which if not args.spec else "spec",
        "claim": _claim_label(m.claim),
        "gamma": m.gamma,
        "h_interval": list(m.h_interval),
        "h_star": opt.h_star,
        "f_B": f_desc,
        "g_prime_at_h_star": opt.slope,
        "regular_density_normalizer": dens.normalizer,
        "regular_density_entropy": dens.relative_entropy(),
        "singular_mass_formula": mass_formula,
        "singular_mass_quadrature": mass_quad,
        "hedging_delta": hedge,
        "claim_stock_covariance": cov,
        "bounds": {
            "L": bounds.L, "l": bounds.l,
            "singular_action_lower": bounds.lower, "singular_action_upper": bounds.upper,
            "singular_norm_lower": bounds.norm_lower, "singular_norm_upper": bounds.norm_upper,
        },
        "checks": {k: "PASS" if v else "FAIL" for k, v in checks.items()},
    }
    _emit(report, args)
    return EXIT_OK if all(checks.values()) else EXIT_SUITE


def cmd_verify(args) -> int:
    names = args.suite or list(SUITES)
    results = run_suites(names, seed=_seed(args), seeds=args.seeds)
    report = {"command": "verify", "seed": _seed(args), "suites": {}}
    for r in results:
        entry = {"status": "PASS" if r.passed else "FAIL"}
        for key, (val, tol) in r.checks.items():
            entry[key] = {"worst": val, "tolerance": tol}
        entry.update(r.info)
        if args.timing:
            entry["seconds"] = r.seconds
        report["suites"][r.name] = entry
    report["all_passed"] = all(r.passed for r in results)
    rows = [("suite", "check", "worst", "tolerance", "status")]
    for r in results:
        for key, (val, tol) in r.checks.items():
            rows.append((r.name, key, f"{val:.3e}", f"{tol:.1e}", "PASS" if val <= tol else "FAIL"))
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    lines = [f"seed {report['seed']}"]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    if args.timing:
        lines += [f"{r.name}: {r.seconds:.2f} s" for r in results]
    lines.append("ALL PASS" if report["all_passed"] else "FAILED: " + ", ".join(
        f"{r.name}.{k}" for r in results for k in r.failures()))
    _emit(report, args, lines)
    return EXIT_OK if report["all_passed"] else EXIT_SUITE


def cmd_norm(args) -> int:
    u = _utility(args)
    values = _floats(args.values)
    probs = _floats(args.probs) if args.probs else np.full(values.size, 1.0 / values.size)
    if probs.shape != values.shape:
        raise UsageError("--values and --probs must have the same length")
    dist = DiscreteDistribution(values, probs)
    report = {"command": "norm", "values": values, "probs": probs}
    if args.kind in ("luxemburg", "both"):
        report["luxemburg"] = luxemburg_norm(dist, u)
    if args.kind in ("orlicz", "both"):
        report["orlicz_dual"] = orlicz_dual_norm(dist, u)
    _emit(report, args)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", metavar="FILE", help="write the report here instead of stdout")


def _utility_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--utility", choices=["exponential", "custom"], default="exponential")
    p.add_argument("--gamma", type=float, default=1.0, help="risk aversion of the exponential utility")
    p.add_argument("--spec", metavar="FILE", help="custom utility spec (JSON with a formula in x)")


def _market_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--market", required=True, metavar="FILE", help="market JSON file")
    _utility_flags(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--claim-const", type=float, help="claim paying this constant in every state")
    g.add_argument("--claim", help="claim payoffs, comma separated")
    g.add_argument("--claim-file", metavar="FILE", help="JSON list of payoffs (or an object with 'claim')")
    p.add_argument("--x0", type=float, help="initial wealth (default: market file x0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orlicz-indiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="indifference price with bounds, slopes and penalties")
    _market_flags(p)
    p.add_argument("--samples", type=int, default=5, help="random measures in the penalty table")
    p.add_argument("--seed", type=int)
    _common(p)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("maximize", help="optimal strategy and utility")
    _market_flags(p)
    _common(p)
    p.set_defaults(func=cmd_maximize)

    p = sub.add_parser("dual", help="dual minimiser (lambda, Q) and residuals")
    _market_flags(p)
    p.add_argument("--tol", type=float, default=1e-9, help="first-order residual tolerance")
    _common(p)
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("example", help="exponential-mixture examples with singular dual parts")
    p.add_argument("--which", type=int, choices=[1, 2], default=2)
    p.add_argument("--delta", type=float, default=0.3, help="claim B = delta * Y (example 2)")
    p.add_argument("--alpha-scale", type=float, default=0.2,
                   help="example 1 claim alpha = scale * tanh(Y Z); 0 gives alpha = 0")
    p.add_argument("--p1", type=float, default=0.99)
    p.add_argument("--r", type=float, default=0.1)
    p.add_argument("--N", type=int, default=50)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--spec", metavar="FILE", help="exponential-mixture market spec overriding the flags")
    _common(p)
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("verify", help="seeded verification suites")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help="number of random markets in the duality fuzz")
    p.add_argument("--suite", action="append", choices=sorted(SUITES), help="run only this suite (repeatable)")
    p.add_argument("--timing", action="store_true", help="include wall-clock seconds (breaks byte-identity)")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("norm", help="Luxemburg and Orlicz dual norms of a discrete variable")
    _utility_flags(p)
    p.add_argument("--values", required=True, help="outcomes, comma separated")
    p.add_argument("--probs", help="probabilities (default uniform)")
    p.add_argument("--kind", choices=["luxemburg", "orlicz", "both"], default="both")
    _common(p)
    p.set_defaults(func=cmd_norm)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MarketValidationError as exc:
        print(f"error [{getattr(exc, 'code', 'invalid-input')}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"error [non-convergence]: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (OSError, ValueError) as exc:
        print(f"error [invalid-input]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
