"""Command-line front end: ``rmt-portfolio {theory,simulate,sweep,spectrum,validate}``.

Machine-readable JSON goes to stdout, human-readable tables to stderr.
Exit codes: 0 success, 1 validation failure, 2 bad arguments, 3 domain or
infeasibility error, 4 convergence failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from . import finite_solver as fs
from . import theory
from .errors import ConvergenceError, DomainError
from .market_sim import Distribution, histogram_l1_distance, sample_decomposition, spectrum_histogram
from .rmt_core import MarketShape, mp_density, mp_support

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_DOMAIN, EXIT_CONVERGENCE = 0, 1, 2, 3, 4

PROBLEMS = ["primal-min", "primal-max", "dual-max", "dual-min",
            "primal-ineq-ge", "primal-ineq-le", "primal-ineq", "budget-only"]


class UsageError(Exception):
    pass


def _number(kind, lower=None, strict=False, name="value"):
    def parse(text):
        try:
            x = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__}: {text!r}")
        if kind is float and not math.isfinite(x):
            raise argparse.ArgumentTypeError(f"{name} must be finite")
        if lower is not None and (x <= lower if strict else x < lower):
            op = ">" if strict else ">="
            raise argparse.ArgumentTypeError(f"{name} must be {op} {lower}, got {text}")
        return x
    return parse


POSITIVE = _number(float, 0.0, strict=True, name="alpha")
TAU = _number(float, 1.0, name="tau")
KAPPA = _number(float, 1.0, name="kappa")
SEED = _number(int, 0, name="seed")


def _clean(obj):
    """Replace non-finite floats with None so stdout is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(_clean(obj), allow_nan=False) + "\n")


def _problem_value(args, problem: str):
    """The tau or kappa flag that ``problem`` needs, or None for budget-only."""
    if problem == "budget-only":
        return None
    if problem.startswith("dual"):
        if args.kappa is None:
            raise UsageError(f"--kappa is required for {problem}")
        return args.kappa
    if args.tau is None:
        raise UsageError(f"--tau is required for {problem}")
    return args.tau


def _direction(args, problem):
    if problem == "primal-ineq-ge":
        return theory.Direction.AT_LEAST
    if problem == "primal-ineq-le":
        return theory.Direction.AT_MOST
    if args.direction is None:
        raise UsageError("--direction is required for primal-ineq")
    return theory.Direction(args.direction.replace("-", "_"))


def _mode(text):
    return theory.InequalityMode(text.replace("-", "_"))


def cmd_theory(args) -> int:
    problem = args.problem
    value = _problem_value(args, problem)
    alpha = args.alpha
    out = {"problem": problem, "alpha": alpha}
    if problem == "budget-only":
        b = theory.budget_only(alpha)
        out.update(objective=b.epsilon, multiplier=0.0, multiplier_infinite=False,
                   regime=theory.BUDGET_ONLY, concentration=b.q_w)
    elif problem.startswith("dual"):
        res = (theory.dual_max if problem == "dual-max" else theory.dual_min)(alpha, value)
        out["kappa"] = value
        out.update(res.as_dict())
    elif problem.startswith("primal-ineq"):
        res = theory.primal_min_inequality(alpha, value, _direction(args, problem), _mode(args.mode))
        out.update(tau=value, direction=_direction(args, problem).value, mode=_mode(args.mode).value)
        out.update(res.as_dict())
    else:
        res = (theory.primal_min if problem == "primal-min" else theory.primal_max)(alpha, value)
        out["tau"] = value
        out.update(res.as_dict())
    if args.roundtrip:
        if problem not in ("primal-min", "primal-max"):
            raise UsageError("--roundtrip applies to primal-min and primal-max")
        rt = theory.primal_dual_roundtrip(alpha, value, tol=math.inf)
        out["roundtrip"] = {
            "kappa": rt.kappa, "recovered_epsilon": rt.recovered_epsilon,
            "min_side_dual": rt.min_side_dual, "min_side_concentration": rt.min_side_concentration,
            "kappa_max_side": rt.kappa_max_side, "recovered_epsilon_max": rt.recovered_epsilon_max,
            "max_side_concentration": rt.max_side_concentration, "discrepancy": rt.discrepancy,
        }
    _emit(out)
    return EXIT_OK


def _experiment_problem(problem, args):
    if problem == "primal-ineq":
        d = _direction(args, problem)
        return ex.Problem.PRIMAL_INEQ_GE if d is theory.Direction.AT_LEAST else ex.Problem.PRIMAL_INEQ_LE
    return ex.parse_problem(problem)


def cmd_simulate(args) -> int:
    problem = _experiment_problem(args.problem, args)
    value = _problem_value(args, args.problem)
    shape = MarketShape.from_alpha(args.N, args.alpha)
    if problem.param_name == "kappa" and not args.alpha > 1:
        raise DomainError(f"dual problems need alpha > 1, got {args.alpha}")
    dec = sample_decomposition(shape, args.seed, 0, args.dist)
    report = ex.solve_point(dec, problem, args.alpha, value if value is not None else 0.0)
    out = {"problem": args.problem, "N": shape.num_assets, "p": shape.num_periods,
           "alpha": args.alpha, "seed": args.seed, "distribution": Distribution(args.dist).value}
    if value is not None:
        out[problem.param_name] = value
    out.update(report.as_dict(include_weights=args.weights))
    out["theory"] = ex.theory_value(problem, args.alpha, value if value is not None else args.alpha)
    _emit(out)
    return EXIT_OK


def _read_config(path: Path) -> dict:
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}: cannot parse line {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            data[k] = v
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be an object")
    return data


def _coerce_config(data: dict) -> dict:
    ints = {"N", "samples_M", "M", "master_seed", "seed", "workers"}
    floats = {"alpha", "start", "stop", "step"}
    out = {}
    for k, v in data.items():
        if k in ints:
            out[k] = int(v)
        elif k in floats:
            out[k] = float(v)
        elif k == "sweep" and isinstance(v, str):
            # start:stop:step, start:stop (unit step) or a single point
            parts = [float(s) for s in v.split(":")]
            out[k] = {"start": parts[0], "stop": parts[1] if len(parts) > 1 else parts[0],
                      "step": parts[2] if len(parts) == 3 else 1.0}
        else:
            out[k] = v
    return out


def _build_config(args) -> ex.ExperimentConfig:
    data = _coerce_config(_read_config(Path(args.config))) if args.config else {}
    flags = {"N": args.N, "alpha": args.alpha, "samples_M": args.M, "problem": args.problem,
             "master_seed": args.seed, "workers": args.workers, "distribution": args.dist}
    for k, v in flags.items():
        if v is not None:
            data.pop({"samples_M": "M", "master_seed": "seed"}.get(k, k), None)
            data[k] = v
    if args.sweep is not None:
        data.pop("sweep", None)
        data.update(_coerce_config({"sweep": args.sweep}))
    for k in ("start", "stop", "step"):
        if getattr(args, k) is not None:
            data[k] = getattr(args, k)
    if "problem" in data:
        try:
            data["problem"] = ex.parse_problem(data["problem"]).value
        except DomainError as exc:
            raise UsageError(str(exc)) from exc
    missing = [k for k in ("N", "alpha", "problem") if k not in data]
    if missing:
        raise UsageError(f"sweep config is missing {', '.join(missing)}")
    data.setdefault("samples_M", data.pop("M", 100))
    try:
        return ex.ExperimentConfig.from_dict(data)
    except (DomainError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid sweep config: {exc}") from exc


def cmd_sweep(args) -> int:
    cfg = _build_config(args)
    rows = ex.run_sweep(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = ["csv", "json"] if args.format == "both" else [args.format]
    files = [str(ex.persist(rows, out_dir / ex.default_filename(cfg, f), f, cfg)) for f in formats]
    report = ex.compare_to_theory(rows, z_max=args.z_max, required_fraction=args.required_fraction)
    err = sys.stderr
    err.write(f"{'param':>8} {'theory':>12} {'mean':>12} {'stderr':>10} {'z':>7} fail\n")
    for r, c in zip(rows, report.rows):
        err.write(f"{r.param_value:8.4g} {r.theory_value:12.6g} {r.sample_mean:12.6g} "
                  f"{r.sample_stderr:10.3g} {c.z_score:7.2f} {r.n_failures}\n")
    verdict = "PASS" if report.passed else "FAIL"
    err.write(f"{verdict}: {report.fraction_ok:.1%} of rows within |z| <= {args.z_max}\n")
    _emit({"passed": report.passed, "fraction_ok": report.fraction_ok, "rows": len(rows),
           "digest": cfg.digest(), "files": files, "config": cfg.as_dict()})
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_spectrum(args) -> int:
    shape = MarketShape.from_alpha(args.N, args.alpha)
    dec = sample_decomposition(shape, args.seed, 0, args.dist)
    hist = spectrum_histogram(dec, args.bins)
    law = np.asarray(mp_density(hist.bin_centers, shape.alpha))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_center", "empirical_density", "mp_density"])
    for c, d, m in zip(hist.bin_centers, hist.density, law):
        writer.writerow([format(c, ".17g"), format(d, ".17g"), format(float(m), ".17g")])
    summary = {"N": shape.num_assets, "p": shape.num_periods, "alpha": shape.alpha, "seed": args.seed,
               "bins": args.bins, "l1_distance": histogram_l1_distance(hist, shape.alpha),
               "zero_mass": hist.zero_mass, "expected_zero_mass": mp_support(shape.alpha).zero_mass}
    if args.out:
        Path(args.out).write_text(buf.getvalue())
        summary["csv"] = str(args.out)
        _emit(summary)
    else:
        sys.stdout.write(buf.getvalue())
        _emit(summary, sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_checks

    results = run_checks(quick=args.quick, mode=args.mode.replace("-", "_"), only=args.only)
    if args.only and not results:
        raise UsageError(f"no check named {args.only}")
    for r in results:
        sys.stderr.write(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail} ({r.seconds:.1f}s)\n")
    passed = all(r.passed for r in results)
    failing = [r.name for r in results if not r.passed]
    if failing:
        sys.stderr.write("failing: " + ", ".join(failing) + "\n")
    _emit({"passed": passed, "quick": args.quick, "mode": args.mode, "failing": failing,
           "checks": [r.as_dict() for r in results]})
    return EXIT_OK if passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmt-portfolio", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="evaluate a large-N closed form")
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--alpha", required=True, type=POSITIVE)
    p.add_argument("--tau", type=TAU)
    p.add_argument("--kappa", type=KAPPA)
    p.add_argument("--direction", choices=["at-least", "at-most"])
    p.add_argument("--mode", default="kkt", choices=["kkt", "paper-literal"])
    p.add_argument("--roundtrip", action="store_true", help="also run the primal-dual roundtrip")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("simulate", help="solve one sampled instance exactly")
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--N", required=True, type=_number(int, 3, name="N"))
    p.add_argument("--alpha", required=True, type=POSITIVE)
    p.add_argument("--tau", type=TAU)
    p.add_argument("--kappa", type=KAPPA)
    p.add_argument("--direction", choices=["at-least", "at-most"])
    p.add_argument("--seed", type=SEED, default=0)
    p.add_argument("--dist", default="standard_normal", choices=[d.value for d in Distribution])
    p.add_argument("--weights", action="store_true", help="include the portfolio weights")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="Monte Carlo sweep over tau or kappa")
    p.add_argument("--config", help="JSON or key=value file with ExperimentConfig fields")
    p.add_argument("--problem", choices=[q.value.replace("_", "-") for q in ex.Problem])
    p.add_argument("--N", type=_number(int, 3, name="N"))
    p.add_argument("--alpha", type=POSITIVE)
    p.add_argument("--M", type=_number(int, 2, name="M"))
    p.add_argument("--sweep", help="start:stop:step, or a single value")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--step", type=_number(float, 0.0, strict=True, name="step"))
    p.add_argument("--seed", type=SEED)
    p.add_argument("--workers", type=_number(int, 1, name="workers"))
    p.add_argument("--dist", choices=[d.value for d in Distribution])
    p.add_argument("--out-dir", default=".")
    p.add_argument("--format", default="csv", choices=["csv", "json", "both"])
    p.add_argument("--z-max", type=float, default=3.0)
    p.add_argument("--required-fraction", type=float, default=0.95)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="eigenvalue histogram against the Marchenko-Pastur law")
    p.add_argument("--N", required=True, type=_number(int, 10, name="N"))
    p.add_argument("--alpha", required=True, type=POSITIVE)
    p.add_argument("--seed", type=SEED, default=0)
    p.add_argument("--bins", type=_number(int, 10, name="bins"), default=50)
    p.add_argument("--dist", default="standard_normal", choices=[d.value for d in Distribution])
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.add_argument("--quick", action="store_true", help="restrict to N <= 200")
    p.add_argument("--mode", default="kkt", choices=["kkt", "paper-literal"])
    p.add_argument("--only", action="append", help="run only the named check (repeatable)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except DomainError as exc:
        sys.stderr.write(f"domain error: {exc}\n")
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        sys.stderr.write(f"convergence failure: {exc} {exc.diagnostics}\n")
        return EXIT_CONVERGENCE
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
