"""Monte Carlo sweeps: sample Wishart matrices, solve at finite N, compare with theory.

Each sample is generated from its own counter-based stream ``(master_seed, index)``,
decomposed once and then solved at every sweep point, so the output does not depend
on how many worker processes share the work.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import finite_solver as fs
from . import theory
from .errors import ConvergenceError, DomainError
from .market_sim import Distribution, sample_decomposition
from .rmt_core import MarketShape


class Problem(str, Enum):
    PRIMAL_MIN = "primal_min"
    PRIMAL_MAX = "primal_max"
    DUAL_MAX = "dual_max"
    DUAL_MIN = "dual_min"
    PRIMAL_INEQ_GE = "primal_ineq_ge"
    PRIMAL_INEQ_LE = "primal_ineq_le"
    BUDGET_ONLY = "budget_only"

    @property
    def param_name(self) -> str:
        if self in (Problem.DUAL_MAX, Problem.DUAL_MIN):
            return "kappa"
        if self is Problem.BUDGET_ONLY:
            return "alpha"
        return "tau"

    @property
    def metric(self) -> str:
        """Quantity averaged over samples: risk per asset or concentration."""
        return "concentration" if self.param_name == "kappa" else "risk"


def parse_problem(name) -> Problem:
    if isinstance(name, Problem):
        return name
    key = str(name).strip().lower().replace("-", "_")
    try:
        return Problem(key)
    except ValueError:
        choices = ", ".join(p.value for p in Problem)
        raise DomainError(f"unknown problem {name!r}; choose from {choices}") from None


@dataclass(frozen=True)
class Sweep:
    start: float
    stop: float
    step: float = 1.0

    def values(self) -> np.ndarray:
        """Inclusive grid; half a step of slack absorbs floating-point drift in the count."""
        n = int(math.floor((self.stop - self.start) / self.step + 0.5)) + 1
        grid = self.start + self.step * np.arange(n)
        return np.round(grid, 12)


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    alpha: float
    samples_M: int
    problem: Problem
    sweep: Sweep = field(default_factory=lambda: Sweep(2.0, 2.0))
    master_seed: int = 0
    workers: int = 1
    distribution: Distribution = Distribution.STANDARD_NORMAL

    def __post_init__(self):
        object.__setattr__(self, "problem", parse_problem(self.problem))
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if isinstance(self.sweep, dict):
            object.__setattr__(self, "sweep", Sweep(**self.sweep))
        elif isinstance(self.sweep, (tuple, list)):
            object.__setattr__(self, "sweep", Sweep(*self.sweep))
        if int(self.N) != self.N or self.N < 3:
            raise DomainError(f"N must be an integer >= 3, got {self.N!r}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be positive, got {self.alpha!r}")
        if int(self.samples_M) != self.samples_M or self.samples_M < 2:
            raise DomainError("samples_M must be an integer >= 2 (the standard error needs two samples)")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise DomainError("master_seed must fit in an unsigned 64-bit integer")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")
        if self.problem is not Problem.BUDGET_ONLY:
            s = self.sweep
            if not s.step > 0:
                raise DomainError("sweep step must be positive")
            if not (1.0 <= s.start <= s.stop):
                raise DomainError(f"sweep needs 1 <= start <= stop, got {s.start!r}..{s.stop!r}")
        MarketShape.from_alpha(self.N, self.alpha)

    @property
    def shape(self) -> MarketShape:
        return MarketShape.from_alpha(self.N, self.alpha)

    def param_values(self) -> np.ndarray:
        if self.problem is Problem.BUDGET_ONLY:
            return np.array([float(self.alpha)])
        return self.sweep.values()

    def as_dict(self) -> dict:
        """Everything that determines the rows; ``workers`` is only a scheduling hint."""
        return {
            "N": int(self.N),
            "alpha": float(self.alpha),
            "samples_M": int(self.samples_M),
            "problem": self.problem.value,
            "sweep": asdict(self.sweep),
            "master_seed": int(self.master_seed),
            "distribution": self.distribution.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        sweep = data.pop("sweep", None)
        keys = {"start", "stop", "step"}
        flat = {k: data.pop(k) for k in list(data) if k in keys}
        if sweep is None:
            sweep = Sweep(**{k: float(v) for k, v in flat.items()}) if flat else Sweep(2.0, 2.0)
        if "M" in data:
            data["samples_M"] = data.pop("M")
        if "seed" in data:
            data["master_seed"] = data.pop("seed")
        return cls(sweep=sweep, **data)

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class SweepRow:
    param_name: str
    param_value: float
    theory_value: float
    sample_mean: float
    sample_std: float
    sample_stderr: float
    max_constraint_residual: float
    n_failures: int
    n_samples: int


def theory_value(problem: Problem, alpha: float, value: float) -> float:
    """Large-N prediction for the averaged quantity at one sweep point."""
    if problem is Problem.BUDGET_ONLY:
        return theory.budget_only(alpha).epsilon
    fn = {
        Problem.PRIMAL_MIN: theory.primal_min,
        Problem.PRIMAL_MAX: theory.primal_max,
        Problem.DUAL_MAX: theory.dual_max,
        Problem.DUAL_MIN: theory.dual_min,
    }.get(problem)
    if fn is not None:
        return fn(alpha, value).objective
    direction = theory.Direction.AT_LEAST if problem is Problem.PRIMAL_INEQ_GE else theory.Direction.AT_MOST
    return theory.primal_min_inequality(alpha, value, direction).objective


def solve_point(dec, problem: Problem, alpha: float, value: float) -> fs.SolveReport:
    if problem is Problem.PRIMAL_MIN:
        return fs.solve_primal(dec, value, theory.Sense.MINIMIZE)
    if problem is Problem.PRIMAL_MAX:
        return fs.solve_primal(dec, value, theory.Sense.MAXIMIZE)
    if problem is Problem.DUAL_MAX:
        return fs.solve_dual(dec, value, theory.Sense.MAXIMIZE, alpha=alpha)
    if problem is Problem.DUAL_MIN:
        return fs.solve_dual(dec, value, theory.Sense.MINIMIZE, alpha=alpha)
    if problem is Problem.PRIMAL_INEQ_GE:
        return fs.solve_primal_inequality(dec, value, theory.Direction.AT_LEAST)
    if problem is Problem.PRIMAL_INEQ_LE:
        return fs.solve_primal_inequality(dec, value, theory.Direction.AT_MOST)
    return fs.solve_budget_only(dec)


def _constraint_residual(report: fs.SolveReport, problem: Problem, value: float) -> float:
    res = abs(fs.budget_residual(report.weights))
    if problem in (Problem.PRIMAL_MIN, Problem.PRIMAL_MAX):
        res = max(res, abs(report.concentration - value))
    elif problem in (Problem.DUAL_MAX, Problem.DUAL_MIN):
        res = max(res, abs(report.residuals.get("risk", 0.0)))
    return res


def _sample_task(args):
    """Solve every sweep point on one sample; failures become NaN with an error tag."""
    cfg_dict, index = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    dec = sample_decomposition(cfg.shape, cfg.master_seed, index, cfg.distribution)
    # the dual target uses the exact eps0 of the nominal alpha, not p/N
    alpha = float(cfg.alpha)
    params = cfg.param_values()
    values = np.full(params.shape, np.nan)
    residuals = np.full(params.shape, np.nan)
    errors = []
    for j, v in enumerate(params):
        try:
            rep = solve_point(dec, cfg.problem, alpha, float(v))
        except (DomainError, ConvergenceError) as exc:
            errors.append((j, type(exc).__name__, str(exc)))
            continue
        values[j] = rep.concentration if cfg.problem.metric == "concentration" else rep.risk_per_asset
        residuals[j] = _constraint_residual(rep, cfg.problem, float(v))
    return values, residuals, errors


def sample_matrix(config: ExperimentConfig):
    """Per-sample values and residuals, shape ``(M, n_points)``, in sample-index order."""
    cfg_dict = config.as_dict()
    tasks = [(cfg_dict, m) for m in range(config.samples_M)]
    if config.workers > 1:
        method = "fork" if "fork" in mp.get_all_start_methods() else "spawn"
        ctx = mp.get_context(method)
        with ProcessPoolExecutor(max_workers=config.workers, mp_context=ctx) as pool:
            results = list(pool.map(_sample_task, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    else:
        results = [_sample_task(t) for t in tasks]
    values = np.vstack([r[0] for r in results])
    residuals = np.vstack([r[1] for r in results])
    errors = [(m, *e) for m, r in enumerate(results) for e in r[2]]
    return values, residuals, errors


def run_sweep(config: ExperimentConfig) -> list[SweepRow]:
    """Aggregate M samples per sweep point into one row each.

    Failed samples are excluded from the statistics and counted in ``n_failures``;
    a point where every sample fails aborts the sweep with that failure.
    """
    values, residuals, errors = sample_matrix(config)
    params = config.param_values()
    rows = []
    for j, v in enumerate(params):
        ok = ~np.isnan(values[:, j])
        n_ok = int(np.count_nonzero(ok))
        if n_ok == 0:
            kinds = {e[2] for e in errors if e[1] == j}
            msg = f"all {config.samples_M} samples failed at {config.problem.param_name}={v!r}"
            first = next(e for e in errors if e[1] == j)
            if kinds == {"ConvergenceError"}:
                raise ConvergenceError(f"{msg}: {first[3]}")
            raise DomainError(f"{msg}: {first[3]}")
        x = values[ok, j]
        mean = float(np.mean(x))
        std = float(np.std(x, ddof=1)) if n_ok > 1 else math.nan
        rows.append(SweepRow(
            param_name=config.problem.param_name,
            param_value=float(v),
            theory_value=float(theory_value(config.problem, config.alpha, float(v))),
            sample_mean=mean,
            sample_std=std,
            sample_stderr=std / math.sqrt(n_ok),
            max_constraint_residual=float(np.max(residuals[ok, j])),
            n_failures=config.samples_M - n_ok,
            n_samples=n_ok,
        ))
    return rows


@dataclass(frozen=True)
class RowComparison:
    param_value: float
    z_score: float
    relative_deviation: float
    ok: bool


@dataclass(frozen=True)
class ComparisonReport:
    rows: list
    fraction_ok: float
    required_fraction: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "fraction_ok": self.fraction_ok,
            "required_fraction": self.required_fraction,
            "rows": [asdict(r) for r in self.rows],
        }


def compare_to_theory(
    rows, z_max: float = 3.0, required_fraction: float = 0.95, abs_tol: float = 1e-9
) -> ComparisonReport:
    """z-scores of the sample means against theory and an overall verdict.

    Rows with zero standard error are judged by ``|mean - theory| <= abs_tol``.
    """
    rows = list(rows)
    if not rows:
        raise DomainError("compare_to_theory needs at least one row")
    out = []
    for r in rows:
        diff = r.sample_mean - r.theory_value
        rel = diff / abs(r.theory_value) if r.theory_value != 0 else diff
        if r.sample_stderr > 0 and math.isfinite(r.sample_stderr):
            z = diff / r.sample_stderr
            ok = abs(z) <= z_max
        else:
            ok = abs(diff) <= abs_tol
            z = 0.0 if ok else math.copysign(math.inf, diff)
        out.append(RowComparison(r.param_value, float(z), float(rel), bool(ok)))
    frac = sum(c.ok for c in out) / len(out)
    return ComparisonReport(out, frac, required_fraction, frac >= required_fraction)


CSV_COLUMNS = ["param_name", "param_value", "theory", "mean", "std", "stderr",
               "max_residual", "n_failures", "n_samples"]
_FIELDS = ["param_name", "param_value", "theory_value", "sample_mean", "sample_std",
           "sample_stderr", "max_constraint_residual", "n_failures", "n_samples"]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def default_filename(config: ExperimentConfig, fmt: str) -> str:
    return f"sweep_{config.problem.value}_{config.digest()[:12]}.{fmt}"


def persist(rows, path, fmt: str = "csv", config: ExperimentConfig | None = None) -> Path:
    """Write rows as CSV (fixed columns, 17 significant digits) or JSON with a config header."""
    path = Path(path)
    fmt = fmt.lower()
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                for r in rows:
                    writer.writerow([_fmt(getattr(r, f)) for f in _FIELDS])
        elif fmt == "json":
            doc = {
                "config": config.as_dict() if config is not None else None,
                "columns": CSV_COLUMNS,
                "rows": [dict(zip(CSV_COLUMNS, (getattr(r, f) for f in _FIELDS))) for r in rows],
            }
            path.write_text(json.dumps(doc, indent=2) + "\n")
        else:
            raise DomainError(f"unknown format {fmt!r}; use csv or json")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def _row_from_record(rec: dict) -> SweepRow:
    vals = {}
    for col, f in zip(CSV_COLUMNS, _FIELDS):
        v = rec[col]
        if f == "param_name":
            vals[f] = str(v)
        elif f in ("n_failures", "n_samples"):
            vals[f] = int(v)
        else:
            vals[f] = float(v)
    return SweepRow(**vals)


def load(path):
    """Read rows back; JSON files also return their stored config (else ``None``)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"could not read {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
        cfg = doc.get("config")
        rows = [_row_from_record(r) for r in doc["rows"]]
        return rows, (ExperimentConfig.from_dict(cfg) if cfg else None)
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is not None and reader.fieldnames != CSV_COLUMNS:
        raise DomainError(f"{path}: unexpected columns {reader.fieldnames}")
    return [_row_from_record(r) for r in reader], None


def self_averaging_std(
    sizes, alpha: float = 2.0, tau: float = 2.0, samples: int = 50, master_seed: int = 0
) -> dict:
    """Sample standard deviation of the finite-N minimal risk for each system size."""
    out = {}
    for n in sizes:
        cfg = ExperimentConfig(int(n), alpha, samples, Problem.PRIMAL_MIN, Sweep(tau, tau), master_seed)
        out[int(n)] = run_sweep(cfg)[0].sample_std
    return out


__all__ = [
    "Problem", "Sweep", "ExperimentConfig", "SweepRow", "RowComparison", "ComparisonReport",
    "run_sweep", "compare_to_theory", "persist", "load", "default_filename", "theory_value",
    "solve_point", "sample_matrix", "self_averaging_std", "parse_problem", "CSV_COLUMNS",
]
