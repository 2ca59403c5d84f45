"""Gauge identity residual against grid size, for m = 2 and 3 and several cutoff polynomials.

    python scripts/gauge_sweep.py --grids 17 33 65
"""

import argparse

from symtomo.fields import GridDomain
from symtomo.harness import cutoff_polynomial, gauge_experiment
from symtomo.symbolic import Polynomial

CORES = ("1 + x1/2 - x2^2/3", "x1*x2 + 2", "3 - x1^3 + x2")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grids", type=int, nargs="+", default=[17, 33, 65])
    ap.add_argument("--basis", type=int, default=20)
    args = ap.parse_args()
    print(f"{'m':>2} {'grid':>5} {'core':<20} {'max rel':>10} {'tol':>10} {'passed':>7}")
    for m in (2, 3):
        for core in CORES:
            phi = cutoff_polynomial(Polynomial.parse(core, 2), 2 * m)
            for points in args.grids:
                rep = gauge_experiment(m, phi, GridDomain.box(2, points), args.basis)
                print(f"{m:>2} {points:>5} {core:<20} {rep['identity_max_relative']:10.2e} "
                      f"{rep['identity_tolerance']:10.2e} {str(rep['identity_passed']):>7}")


if __name__ == "__main__":
    main()
