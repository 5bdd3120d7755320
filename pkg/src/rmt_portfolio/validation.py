"""Self-checks run by ``rmt-portfolio validate``.

Each check returns a :class:`CheckResult`; none of them raise on failure, so a
broken build reports every failing property at once.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from . import experiment as ex
from . import finite_solver as fs
from . import rmt_core, theory
from .market_sim import histogram_l1_distance, sample_decomposition, spectrum_histogram
from .oracles import brute_force_extrema


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def _theta_probes(rng, alpha, n):
    lo, hi = rmt_core._edges(alpha)
    gap = 1e-6 + rng.exponential(2.0, n)
    below = rng.random(n) < 0.5
    if alpha <= 1.0:
        # theta = 0 diverges for alpha <= 1; negative probes only below the bulk
        below_pts = -gap
    else:
        below_pts = lo - gap
    return np.where(below, below_pts, hi + gap)


def check_quadratic_identity(probes: int = 1000, seed: int = 0) -> CheckResult:
    """Residual of the defining quadratic, plus a quadrature check that picks out the branch."""
    rng = np.random.default_rng(seed)
    alphas = rng.uniform(0.1, 6.0, probes)
    worst = 0.0
    for a in alphas:
        th = float(_theta_probes(rng, a, 1)[0])
        s = rmt_core.stieltjes(th, a)
        worst = max(worst, abs(rmt_core.quadratic_residual(th, s, a)) / max(1.0, abs(th) * s * s))
    # both roots solve the quadratic; only the transform of the density matches quadrature
    branch_err = 0.0
    for a, th in [(2.0, -1.0), (2.0, 0.05), (2.0, 7.0), (0.5, -0.3), (0.5, 4.0), (3.0, 9.5)]:
        lo, hi = rmt_core._edges(a)
        val, _ = integrate.quad(lambda x: rmt_core.mp_density(x, a) / (x - th), lo, hi, limit=200)
        if a < 1.0:
            val += (1.0 - a) / (0.0 - th)
        branch_err = max(branch_err, abs(val - rmt_core.stieltjes(th, a)) / max(1.0, abs(val)))
    ok = worst <= 1e-10 and branch_err <= 1e-7
    return CheckResult("quadratic identity", ok,
                       f"max residual {worst:.2e}, max deviation from quadrature {branch_err:.2e}")


def check_stieltjes_derivative(probes: int = 200, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for a in rng.uniform(0.2, 5.0, probes):
        th = float(_theta_probes(rng, a, 1)[0])
        lo, hi = rmt_core._edges(a)
        dist = min(abs(th - lo), abs(th - hi), abs(th) if a <= 1 else math.inf)
        h = 1e-5 * max(dist, 1e-3)
        try:
            fd = (rmt_core.stieltjes(th + h, a) - rmt_core.stieltjes(th - h, a)) / (2 * h)
        except Exception:
            continue
        d = rmt_core.stieltjes_derivative(th, a)
        worst = max(worst, abs(fd - d) / max(abs(d), 1e-300))
    return CheckResult("stieltjes derivative", worst <= 1e-6, f"max relative error {worst:.2e}")


def check_branch_monotonicity(sizes=(3, 50, 200), alphas=(0.5, 2.0, 3.0), seed: int = 11) -> CheckResult:
    bad = []
    for n in sizes:
        for a in alphas:
            dec = sample_decomposition(rmt_core.MarketShape.from_alpha(n, a), seed, 0)
            if a < 1 and n > 3:
                continue
            if not fs.branch_monotonicity(dec):
                bad.append((n, a))
    return CheckResult("branch monotonicity", not bad, f"failing (N, alpha): {bad}" if bad else "all probe grids monotone")


def check_brute_force(seeds: int = 100, taus=(1.2, 1.5, 2.0, 3.0)) -> CheckResult:
    worst = 0.0
    shape = rmt_core.MarketShape.from_counts(3, 6)
    for s in range(seeds):
        dec = sample_decomposition(shape, 1000 + s, 0)
        J = (dec.eigenvectors * dec.eigenvalues) @ dec.eigenvectors.T
        for tau in taus:
            lo, hi = brute_force_extrema(J, tau)
            rmin = fs.solve_primal(dec, tau, "minimize").risk_per_asset
            rmax = fs.solve_primal(dec, tau, "maximize").risk_per_asset
            worst = max(worst, abs(rmin - lo), abs(rmax - hi))
    return CheckResult("brute-force equivalence", worst <= 1e-6, f"max deviation {worst:.2e} over {seeds} seeds")


def check_roundtrip(N: int = 200, seed: int = 5) -> CheckResult:
    """Closed-form roundtrip on a grid, then the finite-N duality on one sample per alpha."""
    worst_cf = 0.0
    for a in (1.5, 2.0, 3.0):
        for tau in (1.2, 2.0, 4.0):
            worst_cf = max(worst_cf, theory.primal_dual_roundtrip(a, tau, tol=math.inf).discrepancy)
    worst_fn = 0.0
    for a in (1.5, 2.0, 3.0):
        dec = sample_decomposition(rmt_core.MarketShape.from_alpha(N, a), seed, 0)
        for tau in (1.2, 2.0, 4.0):
            prim = fs.solve_primal(dec, tau, "minimize")
            # theta >= 0 lies on the max-concentration arc, theta < 0 on the min arc
            sense = "maximize" if prim.multiplier >= 0 else "minimize"
            dual = fs.solve_dual_target(dec, prim.risk_per_asset, sense)
            worst_fn = max(worst_fn, abs(dual.concentration - tau) / tau)
    ok = worst_cf <= 1e-12 * 4 and worst_fn <= 0.01
    return CheckResult("primal-dual roundtrip", ok,
                       f"closed-form discrepancy {worst_cf:.2e}, finite-N relative {worst_fn:.2e} at N={N}")


def check_inequality_cases(N: int = 200, M: int = 20, mode: str = "kkt", seed: int = 17) -> CheckResult:
    """Sampled inequality-constrained minima against the case table chosen by ``mode``."""
    mode = theory.InequalityMode(mode.replace("-", "_"))
    alpha, tau = 3.0, 2.0
    details, ok = [], True
    for prob, direction in ((ex.Problem.PRIMAL_INEQ_GE, "at_least"), (ex.Problem.PRIMAL_INEQ_LE, "at_most")):
        cfg = ex.ExperimentConfig(N, alpha, M, prob, ex.Sweep(tau, tau), seed)
        row = ex.run_sweep(cfg)[0]
        predicted = theory.primal_min_inequality(alpha, tau, direction, mode).objective
        z = (row.sample_mean - predicted) / row.sample_stderr
        ok &= abs(z) <= 3.0
        details.append(f"{direction}: mean {row.sample_mean:.5f} vs {predicted:.5f} (z={z:+.2f})")
    return CheckResult("inequality case assignment", bool(ok), f"mode={mode.value}; " + "; ".join(details))


def check_monte_carlo(N: int = 1000, M: int = 100, seed: int = 42) -> CheckResult:
    details, ok = [], True
    for prob, val in ((ex.Problem.PRIMAL_MIN, 2.0), (ex.Problem.PRIMAL_MAX, 2.0),
                      (ex.Problem.DUAL_MAX, 1.5), (ex.Problem.DUAL_MIN, 1.5)):
        row = ex.run_sweep(ex.ExperimentConfig(N, 2.0, M, prob, ex.Sweep(val, val), seed))[0]
        z = (row.sample_mean - row.theory_value) / row.sample_stderr
        ok &= abs(z) <= 3.0
        details.append(f"{prob.value}: z={z:+.2f}")
    return CheckResult("monte carlo agreement", bool(ok), f"N={N}, M={M}; " + "; ".join(details))


def check_spectrum(N: int = 1000, seed: int = 3) -> CheckResult:
    dec = sample_decomposition(rmt_core.MarketShape.from_alpha(N, 2.0), seed, 0)
    l1 = histogram_l1_distance(spectrum_histogram(dec, 50), 2.0)
    dec_half = sample_decomposition(rmt_core.MarketShape.from_alpha(N, 0.5), seed, 0)
    zero = spectrum_histogram(dec_half, 50).zero_mass
    ok = l1 <= 0.05 and zero == 0.5
    return CheckResult("spectrum", ok, f"L1 {l1:.4f} at alpha=2; zero mass {zero} at alpha=0.5")


def default_checks(quick: bool = True, mode: str = "kkt") -> list[tuple[str, Callable[[], CheckResult]]]:
    size = 200 if quick else 1000
    checks = [
        ("quadratic identity", check_quadratic_identity),
        ("stieltjes derivative", check_stieltjes_derivative),
        ("branch monotonicity", check_branch_monotonicity),
        ("brute-force equivalence", check_brute_force),
        ("primal-dual roundtrip", lambda: check_roundtrip(N=size)),
        ("inequality case assignment",
         lambda: check_inequality_cases(N=200 if quick else 500, M=20, mode=mode)),
    ]
    if quick:
        checks.append(("spectrum", check_spectrum_quick))
    else:
        checks.append(("spectrum", check_spectrum))
        checks.append(("monte carlo agreement", check_monte_carlo))
    return checks


def check_spectrum_quick() -> CheckResult:
    """Smaller-N spectrum check: only the exact atom is tested at N = 200."""
    dec_half = sample_decomposition(rmt_core.MarketShape.from_alpha(200, 0.5), 3, 0)
    zero = spectrum_histogram(dec_half, 20).zero_mass
    return CheckResult("spectrum", zero == 0.5, f"zero mass {zero} at alpha=0.5, N=200")


def run_checks(quick: bool = True, mode: str = "kkt", only=None) -> list[CheckResult]:
    results = []
    for name, fn in default_checks(quick, mode):
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(name, False, f"raised {type(exc).__name__}: {exc}")
        results.append(CheckResult(res.name, res.passed, res.detail, time.perf_counter() - t0))
    return results
