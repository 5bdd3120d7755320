"""Two readings of the inequality-constrained minimum-risk tables, checked by sampling.

``kkt`` assigns each case table by feasibility of the budget-only optimum;
``paper_literal`` keeps the tables attached to the directions as printed.
Sampled minima decide which assignment holds.
"""
import argparse

from rmt_portfolio import experiment as ex
from rmt_portfolio import theory


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--N", type=int, default=500)
    parser.add_argument("--alpha", type=float, default=3.0)
    parser.add_argument("--tau", type=float, default=2.0)
    parser.add_argument("--M", type=int, default=20)
    parser.add_argument("--seed", type=int, default=6)
    args = parser.parse_args()

    for problem, direction in ((ex.Problem.PRIMAL_INEQ_GE, "at_least"), (ex.Problem.PRIMAL_INEQ_LE, "at_most")):
        cfg = ex.ExperimentConfig(args.N, args.alpha, args.M, problem, ex.Sweep(args.tau, args.tau), args.seed)
        row = ex.run_sweep(cfg)[0]
        print(f"\nq {'>=' if direction == 'at_least' else '<='} {args.tau}: sampled {row.sample_mean:.5f} "
              f"+- {row.sample_stderr:.1e}")
        for mode in theory.InequalityMode:
            sol = theory.primal_min_inequality(args.alpha, args.tau, direction, mode)
            z = (row.sample_mean - sol.objective) / row.sample_stderr
            print(f"  {mode.value:>13}: {sol.objective:.5f}  case={sol.regime:<8} z={z:+7.2f}")


if __name__ == "__main__":
    main()
