"""Discrete rates against their diffusion limits as the step shrinks.

    python scripts/convergence_sweep.py [--k1 24] [--csv runs/convergence.csv]
"""
import argparse
import math

from weakgarch.cli import BASELINE
from weakgarch.limit import convergence_table, kappa_limit, write_convergence_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k0", type=int, default=4)
    ap.add_argument("--k1", type=int, default=24)
    ap.add_argument("--csv")
    args = ap.parse_args()
    rows = convergence_table(BASELINE, [2.0**-k for k in range(args.k0, args.k1 + 1)])
    print(f"{'delta':>10} {'alpha err':>10} {'theta err':>10} {'omega err':>10} {'kappa':>12}  alpha err / sqrt(delta)")
    for r in rows:
        ea = abs(r.alpha_rate / BASELINE.alpha - 1)
        et = abs(r.theta_rate / BASELINE.theta - 1)
        eo = abs(r.omega_rate / BASELINE.omega - 1)
        print(f"{r.delta:10.3e} {ea:10.3e} {et:10.3e} {eo:10.3e} {r.kappa_value:12.8f}  {ea / math.sqrt(r.delta):.4f}")
    print(f"limit kurtosis {kappa_limit(BASELINE)}")
    if args.csv:
        write_convergence_csv(rows, args.csv)


if __name__ == "__main__":
    main()
