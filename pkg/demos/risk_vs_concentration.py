"""Minimal and maximal risk per asset against the concentration level.

Samples a handful of return matrices, solves each exactly, and prints the
ensemble mean next to the large-N closed form.  Run with ``--N 1000 --M 100``
for the full-size experiment (a couple of minutes on one core).
"""
import argparse

from rmt_portfolio import experiment as ex


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--N", type=int, default=200)
    parser.add_argument("--alpha", type=float, default=2.0)
    parser.add_argument("--M", type=int, default=20)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    sweep = ex.Sweep(1.2, 4.0, 0.4)
    for problem in (ex.Problem.PRIMAL_MIN, ex.Problem.PRIMAL_MAX):
        cfg = ex.ExperimentConfig(args.N, args.alpha, args.M, problem, sweep, args.seed)
        rows = ex.run_sweep(cfg)
        report = ex.compare_to_theory(rows)
        print(f"\n{problem.value}  (N={args.N}, alpha={args.alpha}, M={args.M})")
        print(f"{'tau':>5} {'theory':>10} {'mean':>10} {'stderr':>9} {'z':>6}")
        for r, c in zip(rows, report.rows):
            print(f"{r.param_value:5.2f} {r.theory_value:10.5f} {r.sample_mean:10.5f} "
                  f"{r.sample_stderr:9.2e} {c.z_score:6.2f}")
        print(f"rows within |z| <= 3: {report.fraction_ok:.0%}")


if __name__ == "__main__":
    main()
