"""Convergence of the trace-free decomposition on an exact-form input.

The input is the Hessian of a box-supported polynomial plus a trace term, so
the continuous trace-free remainder is zero and the discrete one measures the
discretisation error.

    python scripts/decomposition_convergence.py --grids 17 33 65
"""

import argparse
import math

import numpy as np

from symtomo.decomposition import DecompositionConfig, helmholtz_trace_free
from symtomo.fields import GridDomain, TensorField
from symtomo.harness import cutoff_polynomial
from symtomo.symbolic import Polynomial


def exact_form(d: GridDomain) -> TensorField:
    psi = cutoff_polynomial(Polynomial.parse("x1 + 2*x2^2", 2), 4)
    w = Polynomial.parse("1 + x1*x2", 2) * cutoff_polynomial(Polynomial.constant(1, 2), 3)
    mesh = d.mesh()
    hess = [psi.diff_multi(a)(*mesh) for a in ((2, 0), (1, 1), (0, 2))]
    wv = w(*mesh)
    return TensorField(d, 2, np.stack([hess[0] + wv, hess[1], hess[2] + wv], axis=-1))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grids", type=int, nargs="+", default=[17, 33, 65])
    args = ap.parse_args()
    prev = None
    print(f"{'grid':>5} {'remainder':>11} {'order':>6} {'cg its':>7}")
    for points in args.grids:
        res = helmholtz_trace_free(exact_form(GridDomain.box(2, points)), DecompositionConfig(tol=1e-12))
        err = res.metrics["f_tilde_relative"]
        order = "" if prev is None else f"{math.log2(prev / err):6.2f}"
        print(f"{points:>5} {err:11.3e} {order:>6} {res.metrics['cg_iterations']:>7}")
        prev = err


if __name__ == "__main__":
    main()
