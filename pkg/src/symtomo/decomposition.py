"""Trace-free potential decomposition ``f = f~ + i_delta v + d^m phi`` on a grid.

Derivatives use central differences against a zero ghost layer, for which
the divergence is exactly minus the transpose of the symmetric derivative.
The scalar potential lives on nodes at least ``m`` cells from every face and
is zero on the outer ``m`` layers, a discrete form of vanishing normal
derivatives of order below ``m``.  It solves the normal equations

    (-1)^m delta^m p d^m phi = (-1)^m delta^m p f

by conjugate gradients on the interior nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import tensor_core as tc
from .fields import GridDomain, TensorField, iterated

__all__ = [
    "DecompositionResult",
    "DecompositionConfig",
    "potential_operator",
    "helmholtz_trace_free",
    "symbol_rayleigh",
    "symbol_quadratic_identity",
    "symbol_sweep",
    "low_degree_component",
]

BOUNDARY = "zero"


@dataclass(frozen=True)
class DecompositionConfig:
    tol: float = 1e-8
    maxiter_factor: float = 20


@dataclass
class DecompositionResult:
    f_tilde: TensorField
    v: TensorField | None
    phi: TensorField
    cg_iterations: int
    cg_residual: float
    metrics: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.f_tilde.m


class _Counter:
    def __init__(self):
        self.count = 0

    def __call__(self, _xk):
        self.count += 1


def _project(f: TensorField) -> TensorField:
    return f.pointwise(tc.projection_matrix(f.n, f.m), f.m)


def potential_operator(domain: GridDomain, m: int):
    """``(apply, mask)``: the map ``phi -> (-1)^m delta^m p d^m phi`` on interior nodes."""
    mask = domain.interior_mask(m)
    size = int(mask.sum())

    def apply(x):
        vals = np.zeros(domain.shape, dtype=complex)
        vals[mask] = x
        g = _project(iterated("d", m, TensorField(domain, 0, vals), BOUNDARY))
        out = iterated("delta", m, g, BOUNDARY).scalar_values()[mask]
        return (-1) ** m * out

    return LinearOperator((size, size), matvec=apply, dtype=complex), mask


def _weighted_norm(values: np.ndarray, n: int, m: int) -> float:
    w = tc.multiplicities(n, m)
    return math.sqrt(float(np.sum(w * np.abs(values) ** 2)))


def helmholtz_trace_free(f: TensorField, config: DecompositionConfig = DecompositionConfig()) -> DecompositionResult:
    """Split ``f`` into a trace-free, divergence-free part, a trace part and a potential part.

    Norms in the reported metrics are plain (multiplicity-weighted) grid sums
    divided by that of ``f``.  The divergence residual is measured on the
    potential's unknown nodes, where the equation is imposed.
    """
    m, domain = f.m, f.domain
    if m not in (1, 2):
        raise ValueError("field-level decomposition supports m in {1, 2}")
    if min(domain.shape) < 2 * m + 3:
        raise ValueError("grid too small for the requested order")
    op, mask = potential_operator(domain, m)
    pf = _project(f)
    rhs = (-1) ** m * iterated("delta", m, pf, BOUNDARY).scalar_values()[mask]
    counter = _Counter()
    fnorm = _weighted_norm(f.values, f.n, m)
    if np.linalg.norm(rhs) == 0:
        x, info = np.zeros(op.shape[0], dtype=complex), 0
    else:
        x, info = cg(op, rhs, rtol=config.tol, atol=0.0, maxiter=max(1, int(config.maxiter_factor * op.shape[0])),
                     callback=counter)
    if info > 0:
        raise ArithmeticError(f"conjugate gradients did not converge in {info} iterations")
    cg_res = float(np.linalg.norm(op.matvec(x) - rhs) / max(np.linalg.norm(rhs), 1e-300))
    phi_vals = np.zeros(domain.shape, dtype=complex)
    phi_vals[mask] = x
    phi = TensorField(domain, 0, phi_vals)
    dphi = iterated("d", m, phi, BOUNDARY)
    if m >= 2:
        jd = (f - dphi).pointwise(tc.j_delta_matrix(f.n, m), m - 2)
        v = jd.pointwise(np.linalg.inv(tc.jdelta_idelta_matrix(f.n, m - 2)), m - 2)
        trace_part = v.pointwise(tc.i_delta_matrix(f.n, m - 2), m)
    else:
        v = None
        trace_part = TensorField.zeros(domain, m)
    f_tilde = f - trace_part - dphi
    result = DecompositionResult(f_tilde, v, phi, counter.count, cg_res)
    div = iterated("delta", m, f_tilde, BOUNDARY).scalar_values()[mask]
    trace = f_tilde.pointwise(tc.j_delta_matrix(f.n, m), max(m - 2, 0)).values if m >= 2 else np.zeros(1)
    recon = f - f_tilde - trace_part - dphi
    scale = max(fnorm, 1e-300)
    result.metrics = {
        "m": m,
        "grid": "x".join(map(str, domain.shape)),
        "cg_iterations": counter.count,
        "cg_relative_residual": cg_res,
        "reassembly_error": _weighted_norm(recon.values, f.n, m) / scale,
        "trace_max": float(np.abs(trace).max()),
        "divergence_relative": float(np.linalg.norm(div)) / scale,
        "f_tilde_relative": _weighted_norm(f_tilde.values, f.n, m) / scale,
        "v_norm": 0.0 if v is None else _weighted_norm(v.values, f.n, m - 2),
        "phi_max": phi.max_abs(),
        "phi_low_degree_fraction": low_degree_component(phi, m),
    }
    return result


def low_degree_component(phi: TensorField, m: int) -> float:
    """Relative size of the least-squares fit of ``phi`` by polynomials of degree < m."""
    vals = phi.scalar_values().ravel()
    nrm = np.linalg.norm(vals)
    if nrm == 0:
        return 0.0
    mesh = [g.ravel() for g in phi.domain.mesh()]
    cols = []
    for deg in range(m):
        for J in tc.sym_indices(phi.n, deg):
            cols.append(np.prod([mesh[a] for a in J], axis=0) if J else np.ones_like(mesh[0]))
    basis = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
    return float(np.linalg.norm(basis @ coef) / nrm)


def symbol_rayleigh(xi, m: int, phi: complex = 1.0) -> float:
    """``<j_xi^m p i_xi^m phi, phi> = |p i_xi^m phi|^2`` for a scalar ``phi``."""
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        raise ValueError("xi must be nonzero")
    lifted = tc.i_vec_power(tc.SymTensor.scalar(phi, len(xi)), xi.astype(complex), m)
    return tc.projection_p(lifted).norm() ** 2


def symbol_quadratic_identity(xi, f: tc.SymTensor) -> tuple[float, float]:
    """Both sides of ``(r+1)|p i_xi f|^2 = |xi|^2 |f|^2 + r (1 - 2/(n+2r-2)) |j_xi f|^2``.

    ``f`` must be trace-free of rank ``r >= 1``.  With ``f = p i_xi^r phi`` the
    left side is ``(r+1)`` times the rank-``(r+1)`` Rayleigh value.
    """
    xi = np.asarray(xi, dtype=float)
    n, r = f.n, f.m
    if r < 1:
        raise ValueError("identity needs rank >= 1")
    lhs = (r + 1) * tc.projection_p(tc.i_vec(f, xi.astype(complex))).norm() ** 2
    jxf = tc.j_vec(f, xi.astype(complex))
    rhs = float(xi @ xi) * f.norm() ** 2 + r * (1 - 2 / (n + 2 * r - 2)) * jxf.norm() ** 2
    return lhs, rhs


def symbol_sweep(m: int, n: int, count: int = 100, seed: int = 0) -> dict:
    """Rayleigh values and identity errors over seeded random unit directions."""
    rng = np.random.default_rng(seed)
    values, errors = [], []
    for _ in range(count):
        xi = rng.standard_normal(n)
        xi /= np.linalg.norm(xi)
        values.append(symbol_rayleigh(xi, m))
        if m >= 2:
            f = tc.projection_p(tc.i_vec_power(tc.SymTensor.scalar(1.0, n), xi.astype(complex), m - 1))
            lhs, rhs = symbol_quadratic_identity(xi, f)
            errors.append(abs(lhs - rhs) / max(abs(rhs), 1e-300))
            errors.append(abs(m * values[-1] - rhs) / max(abs(rhs), 1e-300))
    return {"m": m, "n": n, "min_value": min(values), "max_value": max(values),
            "max_identity_error": max(errors, default=0.0)}
