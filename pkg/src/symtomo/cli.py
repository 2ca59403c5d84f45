"""Command-line harness.

Exit codes: 0 on success, 2 on invalid input, 3 when a numerical guard trips
(non-convergence, size limits, non-finite results).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .decomposition import DecompositionConfig, helmholtz_trace_free, symbol_sweep
from .fields import GridDomain
from .harness import (CoefficientSet, DemoConfig, ball_bump, default_gauge_phi, gauge_experiment,
                      hypothesis_check, integral_identity, moment_recovery_demo, pure_gauge_set,
                      gauge_vector, tracefree_bump)
from .io import FormatError, format_report, read_ray_table, read_stf, write_ray_table, write_report, write_stf
from .mrt import equidistributed_rays, forward_Jk
from .mrt_algebra import (determinant_check, kernel_probe, random_bump_field, separate_components,
                          separation_matrix)
from .symbolic import Polynomial

log = logging.getLogger("symtomo")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class ValidationError(ValueError):
    pass


class NumericalGuardError(ArithmeticError):
    pass


def _complex_list(text: str) -> list[complex]:
    try:
        return [complex(s.strip().replace(" ", "")) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse complex list {text!r}") from exc


def _domain(args, n: int) -> GridDomain:
    if args.grid < 5:
        raise ValidationError("--grid must be at least 5")
    return GridDomain.box(n, args.grid)


def _finite(metrics: dict) -> dict:
    for k, v in metrics.items():
        if isinstance(v, (float, complex, np.floating, np.complexfloating)) and not np.isfinite(v):
            raise NumericalGuardError(f"metric {k} is not finite")
    return metrics


def _emit(args, metrics: dict, name: str) -> None:
    _finite(metrics)
    text = format_report(metrics, args.format)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        target = out / f"{name}.{'csv' if args.format == 'csv' else 'txt'}" if out.is_dir() or not out.suffix else out
        write_report(target, metrics, args.format)


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# subcommands

def cmd_decompose(args) -> None:
    if args.input:
        f = read_stf(args.input)
    else:
        rng = np.random.default_rng(args.seed)
        f = random_bump_field(_domain(args, args.dim), args.m, rng)
    cfg = DecompositionConfig(tol=args.tol if args.tol is not None else 1e-8)
    try:
        res = helmholtz_trace_free(f, cfg)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    out = _out_dir(args)
    if out is not None:
        write_stf(out / "f_tilde.stf", res.f_tilde, args.binary)
        write_stf(out / "phi.stf", res.phi, args.binary)
        if res.v is not None:
            write_stf(out / "v.stf", res.v, args.binary)
    _emit(args, res.metrics, "decompose")


def cmd_mrt(args) -> None:
    if args.input:
        parts = [read_stf(p) for p in args.input]
        ranks = sorted(p.m for p in parts)
        if ranks != list(range(len(parts))):
            raise ValidationError("inputs must be the parts of ranks 0..m of one mixed field")
        F = sorted(parts, key=lambda p: p.m)
    else:
        rng = np.random.default_rng(args.seed)
        dom = _domain(args, args.dim)
        F = [random_bump_field(dom, p, rng) for p in range(args.m + 1)]
    dom = F[0].domain
    if any(p.domain != dom for p in F):
        raise ValidationError("all parts must share one grid")
    if args.rays_file:
        rays, _ = read_ray_table(args.rays_file)
    else:
        rays = equidistributed_rays(dom, args.rays, k=args.k, seed=args.seed)
    for r in rays:
        if r.n != dom.n:
            raise ValidationError("ray dimension does not match the field")
    values = [forward_Jk(F, r) for r in rays]
    out = _out_dir(args)
    if out is not None:
        write_ray_table(out / "rays.csv", rays, values)
    vals = np.abs(values)
    _emit(args, {"m": len(F) - 1, "n": dom.n, "rays": len(rays), "max_abs_value": float(vals.max()),
                 "mean_abs_value": float(vals.mean())}, "mrt")


def cmd_separate(args) -> None:
    c = _complex_list(args.c)
    if len(c) != args.m + 1:
        raise ValidationError(f"need {args.m + 1} constants for m = {args.m}")
    try:
        computed, formula, rel = determinant_check(args.m, c)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    tol = args.tol if args.tol is not None else 1e-8
    metrics = {"m": args.m, "det_computed": complex(computed), "det_formula": complex(formula),
               "det_relative_error": float(rel), "det_passed": bool(rel < tol)}
    if args.rhs:
        rhs = _complex_list(args.rhs)
        if len(rhs) != args.m + 1:
            raise ValidationError(f"need {args.m + 1} right-hand sides")
        if separation_matrix(args.m, c).det_formula == 0:
            raise NumericalGuardError("separation matrix is singular")
        x = separate_components(np.asarray(rhs, complex), args.m, c)
        for j, val in enumerate(x):
            metrics[f"component_{args.m - j}"] = complex(val)
    _emit(args, metrics, "separate")


def cmd_kernel(args) -> None:
    dom = _domain(args, args.dim)
    svd_dom = GridDomain.box(args.dim, args.svd_grid) if args.m <= 1 else None
    try:
        rep = kernel_probe(args.m, dom, ray_count=args.rays, trials=args.trials, seed=args.seed,
                           svd_domain=svd_dom)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    _emit(args, rep.metrics(), "kernel")


def _phi(args, n: int) -> Polynomial:
    try:
        return Polynomial.parse(args.phi, n) if args.phi else default_gauge_phi(n, args.m)
    except Exception as exc:  # sympy raises a variety of parse errors
        raise ValidationError(f"cannot parse polynomial {args.phi!r}: {exc}") from exc


def cmd_gauge_check(args) -> None:
    dom = _domain(args, args.dim)
    try:
        rep = gauge_experiment(args.m, _phi(args, args.dim), dom, args.basis, args.tol)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    _emit(args, rep, "gauge")


def _coefficients(args, n: int) -> CoefficientSet:
    if args.coeff:
        fields = [None] * (2 * args.m)
        for path in args.coeff:
            f = read_stf(path)
            if f.m >= 2 * args.m:
                raise ValidationError(f"coefficient rank {f.m} too large for m = {args.m}")
            fields[f.m] = f
        try:
            return CoefficientSet(args.m, fields)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
    return pure_gauge_set(_domain(args, n), args.m, _phi(args, n))


def cmd_identity(args) -> None:
    coeffs = _coefficients(args, args.dim)
    n = coeffs.domain.n
    try:
        u = Polynomial.parse(args.u, n)
        v = Polynomial.parse(args.v, n)
    except Exception as exc:
        raise ValidationError(f"cannot parse u or v: {exc}") from exc
    rep = integral_identity(coeffs, u, v, args.tol)
    _emit(args, {"value": rep.value, "scale": rep.scale, "relative": rep.relative,
                 "tolerance": rep.tolerance, "passed": rep.passed}, "identity")


def cmd_phantom(args) -> None:
    dom = _domain(args, args.dim)
    out = _out_dir(args)
    if args.kind == "ball":
        fields = {"ball_bump": ball_bump(dom)}
    elif args.kind == "tracefree":
        fields = {"tracefree_bump": tracefree_bump(dom, args.m, seed=args.seed)}
    else:
        gauge = pure_gauge_set(dom, args.m, _phi(args, args.dim))
        fields = {f"gauge_a{l}": f for l, f in enumerate(gauge.fields) if f is not None}
    metrics = {"kind": args.kind, "grid": "x".join(map(str, dom.shape))}
    for name, f in fields.items():
        metrics[f"{name}_max_abs"] = f.max_abs()
        if out is not None:
            write_stf(out / f"{name}.stf", f, args.binary)
    _emit(args, metrics, "phantom")


def cmd_hypotheses(args) -> None:
    coeffs = _coefficients(args, args.dim)
    metrics = {"m": args.m}
    for which in ("trace-free", "div-free", "boundary-jets"):
        ok, res = hypothesis_check(coeffs, which)
        key = which.replace("-", "_")
        metrics[f"{key}_residual"] = float(res)
        metrics[f"{key}_holds"] = bool(ok)
    _emit(args, metrics, "hypotheses")


def cmd_demo(args) -> None:
    if args.grid > 33:
        raise ValidationError("demo grid limited to 33 points per axis")
    dom = _domain(args, 3)
    cfg = DemoConfig(directions=args.directions)
    if args.kind == "tracefree":
        res = moment_recovery_demo(tracefree_bump(dom, 2, radius=0.55, centre=(0.05, 0.1, -0.15),
                                                  seed=args.seed), config=cfg)
    else:
        gauge = pure_gauge_set(dom, 2, orders=(2, 3))
        res = moment_recovery_demo(gauge.d_form(2), gauge_vector(gauge.d_form(3)), config=cfg)
    _emit(args, {k: v for k, v in res.items() if not isinstance(v, np.ndarray)}, "demo")


def cmd_symbol(args) -> None:
    _emit(args, symbol_sweep(args.m, args.dim, args.count, args.seed), "symbol")


# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, default=17, help="grid points per axis on [-1, 1]^n")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None, help="solver or check tolerance")
    common.add_argument("--out", default=None, help="output directory (or report file)")
    common.add_argument("--format", choices=("text", "csv"), default="text")
    common.add_argument("--binary", action="store_true", help="write STF files in the binary container")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="symtomo", description="Tensor tomography experiments.", parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp_ = sub.add_parser(name, help=help_, parents=[common])
        sp_.set_defaults(func=func)
        return sp_

    s = add("decompose", cmd_decompose, "trace-free potential decomposition of a field")
    s.add_argument("--input", help="STF file (rank 1 or 2); default: random bump field")
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--dim", type=int, default=2)

    s = add("mrt", cmd_mrt, "forward transform of a mixed field along rays, written as a ray table")
    s.add_argument("--input", nargs="+", help="STF parts of ranks 0..m")
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--k", type=int, default=0, help="moment order for generated rays")
    s.add_argument("--rays", type=int, default=50)
    s.add_argument("--rays-file", help="ray-table CSV giving the rays to evaluate")

    s = add("separate", cmd_separate, "determinant check and separation of moment components")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--c", required=True, help="comma-separated constants c_0..c_m")
    s.add_argument("--rhs", help="comma-separated right-hand sides r = 0..m")

    s = add("kernel", cmd_kernel, "kernel or singular-value probe of the transform")
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--rays", type=int, default=200)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--svd-grid", type=int, default=9)

    s = add("gauge-check", cmd_gauge_check, "gauge shift of the top coefficient and linearized identity")
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--phi", help="polynomial in x1..xn; default: a box-supported cutoff polynomial")
    s.add_argument("--basis", type=int, default=20)

    for name, func, help_ in (("identity", cmd_identity, "integral identity for one pair (u, v)"),
                              ("hypotheses", cmd_hypotheses, "check hypotheses on the top coefficient")):
        s = add(name, func, help_)
        s.add_argument("--m", type=int, default=2)
        s.add_argument("--dim", type=int, default=2)
        s.add_argument("--coeff", nargs="+", help="STF coefficient files (D convention); default: gauge set")
        s.add_argument("--phi", help="gauge polynomial for the default coefficient set")
        if name == "identity":
            s.add_argument("--u", default="1")
            s.add_argument("--v", default="1")

    s = add("phantom", cmd_phantom, "write built-in phantoms as STF files")
    s.add_argument("--kind", choices=("ball", "tracefree", "gauge"), default="tracefree")
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--phi")

    s = add("demo", cmd_demo, "moment-recovery demo (three dimensions, order two)")
    s.add_argument("--kind", choices=("tracefree", "gauge"), default="tracefree")
    s.add_argument("--directions", type=int, default=64)

    s = add("symbol", cmd_symbol, "Rayleigh values of the projected symbol")
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--count", type=int, default=100)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValidationError, FormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalGuardError, ArithmeticError, MemoryError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
