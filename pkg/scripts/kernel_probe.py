"""Kernel residuals of the mixed transform and singular values for low orders.

    python scripts/kernel_probe.py --grid 17 --rays 200
"""

import argparse

from symtomo.fields import GridDomain
from symtomo.mrt_algebra import kernel_probe


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=17)
    ap.add_argument("--rays", type=int, default=200)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--svd-grid", type=int, default=9)
    args = ap.parse_args()
    d = GridDomain.box(2, args.grid)
    rep = kernel_probe(2, d, ray_count=args.rays, trials=args.trials)
    print(f"m=2: kernel max {rep.kernel_max:.2e}, non-kernel min {rep.nonkernel_min:.3e}, "
          f"non-kernel residuals sorted: " + " ".join(f"{v:.3f}" for v in sorted(rep.nonkernel_residuals)))
    for m in (0, 1):
        r = kernel_probe(m, d, ray_count=args.rays, svd_domain=GridDomain.box(2, args.svd_grid))
        lo, hi = r.singular_values
        print(f"m={m}: sigma_min {lo:.3e}, sigma_max {hi:.3e}, ratio {r.sv_ratio:.2e}")


if __name__ == "__main__":
    main()
