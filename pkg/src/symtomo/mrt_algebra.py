"""Separating sums of momentum transforms of different orders, and kernel probes.

Data ``D_r = sum_j c_j J^{r+j} F_j`` (``r = 0..m``) satisfies, after
``r`` derivatives along the ray and division by ``(-1)^r r!``,

    sum_j c_j C(j + r, r) J^j F_j,

so the vector ``X = (J^m F_m, ..., J^0 F_0)`` solves ``A X = rhs`` with
``A[r][col] = c_{m-col} C(m-col+r, r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from . import tensor_core as tc
from .fields import GridDomain, TensorField
from .mrt import Ray, build_Im_matrix, default_step, equidistributed_rays, field_domain, forward_Jk

__all__ = [
    "SeparationMatrix",
    "separation_matrix",
    "determinant_formula",
    "determinant_check",
    "column_subtraction_det",
    "assemble_rhs",
    "separate_components",
    "separate_shifted",
    "stencil_weights",
    "ray_derivative",
    "separate_ray",
    "kernel_relation_field",
    "random_bump_field",
    "KernelReport",
    "kernel_probe",
]


@dataclass(frozen=True)
class SeparationMatrix:
    m: int
    c: tuple
    matrix: np.ndarray

    @property
    def det_formula(self):
        return determinant_formula(self.m, self.c)


def _check_constants(m: int, c) -> tuple:
    c = tuple(c)
    if m < 0:
        raise ValueError("order must be non-negative")
    if len(c) != m + 1:
        raise ValueError(f"need {m + 1} constants c_0..c_{m}, got {len(c)}")
    if any(v == 0 for v in c):
        raise ValueError("all constants must be nonzero")
    return c


def separation_matrix(m: int, c) -> SeparationMatrix:
    c = _check_constants(m, c)
    dtype = complex if any(isinstance(v, complex) for v in c) else float
    mat = np.empty((m + 1, m + 1), dtype=dtype)
    for r in range(m + 1):
        for col in range(m + 1):
            mat[r, col] = c[m - col] * math.comb(m - col + r, r)
    mat.setflags(write=False)
    return SeparationMatrix(m, c, mat)


def determinant_formula(m: int, c):
    return (-1) ** (m * (m + 1) // 2) * math.prod(c)


def determinant_check(m: int, c) -> tuple:
    """``(LU determinant, closed form, relative error)``."""
    if m > 12:
        raise ValueError("determinant check supports m <= 12")
    sm = separation_matrix(m, c)
    lu, piv = sla.lu_factor(sm.matrix)
    sign = (-1) ** int(np.sum(piv != np.arange(m + 1)))
    computed = sign * np.prod(np.diag(lu))
    formula = determinant_formula(m, sm.c)
    return computed, formula, float(abs(computed - formula) / abs(formula))


def _binomial_det(size: int, offset: int = 0) -> Fraction:
    # det [C(offset + i + r, r)]_{r, col} with i = size-1-col.  Subtracting each
    # column's right neighbour turns row 0 into (0, .., 0, 1) by Pascal's rule
    # and leaves the same family with offset + 1 in the remaining minor.
    if size == 1:
        return Fraction(1)
    rows = [[Fraction(math.comb(offset + size - 1 - col + r, r)) for col in range(size)] for r in range(size)]
    for col in range(size - 1):
        for r in range(size):
            rows[r][col] -= rows[r][col + 1]
    if any(v != 0 for v in rows[0][:-1]) or rows[0][-1] != 1:
        raise ArithmeticError("column subtraction did not clear the first row")
    minor = [row[:-1] for row in rows[1:]]
    expected = [[Fraction(math.comb(offset + 1 + size - 2 - col + r, r)) for col in range(size - 1)]
                for r in range(size - 1)]
    if minor != expected:
        raise ArithmeticError("minor is not the shifted binomial family")
    return (-1) ** (size - 1) * _binomial_det(size - 1, offset + 1)


def column_subtraction_det(m: int, c):
    """Determinant by repeated column subtraction, exact for rational constants."""
    c = _check_constants(m, c)
    scale = math.prod(Fraction(v) if isinstance(v, int) else v for v in c)
    return _binomial_det(m + 1) * scale


def assemble_rhs(m: int, c, values) -> np.ndarray:
    """Normalized data from component values ``X = (J^m F_m, .., J^0 F_0)``."""
    return separation_matrix(m, c).matrix @ np.asarray(values)


def separate_components(rhs, m: int, c) -> np.ndarray:
    """Solve ``A X = rhs``; ``rhs`` may carry trailing batch axes."""
    rhs = np.asarray(rhs)
    if rhs.shape[:1] != (m + 1,):
        raise ValueError(f"rhs must have leading dimension {m + 1}, got {rhs.shape}")
    return np.linalg.solve(separation_matrix(m, c).matrix, rhs.reshape(m + 1, -1)).reshape(rhs.shape)


def separate_shifted(rhs, m: int, d) -> np.ndarray:
    """Variant ``sum_{j=1..m} d_j J^{k+j-1} F_j``: returns ``(J^{m-1} F_m, .., J^0 F_1)``.

    ``d`` holds ``d_1..d_m``; it is the first construction with order ``m-1``
    and constants ``c_j = d_{j+1}``.
    """
    if m < 1:
        raise ValueError("shifted variant needs m >= 1")
    return separate_components(rhs, m - 1, tuple(d))


def stencil_weights(p: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric finite-difference weights for the p-th derivative at 0.

    Exact on polynomials of degree ``<= max(degree, p)``; nodes are the
    integers ``-K..K``.  Divide by ``h**p`` for spacing ``h``.
    """
    K = max(1, math.ceil(max(degree, p) / 2))
    nodes = np.arange(-K, K + 1)
    V = np.vander(nodes, 2 * K + 1, increasing=True).T.astype(float)
    e = np.zeros(2 * K + 1)
    e[p] = math.factorial(p)
    return nodes, np.linalg.solve(V, e)


def ray_derivative(F, ray: Ray, p: int, degree: int | None = None, shift: float | None = None) -> complex:
    """``<xi, d/dx>^p J^k F`` at the ray by central differences over shifted base points.

    The shift is a whole number of quadrature steps, so the difference is
    exact for the discrete transform, which is a polynomial of degree ``k``
    in the shift.
    """
    domain = field_domain(F)
    step = default_step(domain, ray.xi)
    if shift is None:
        shift = 2 * step
    if degree is None:
        degree = ray.k
    nodes, w = stencil_weights(p, degree)
    total = 0j
    for s, wi in zip(nodes, w):
        total += wi * forward_Jk(F, ray.shifted(s * shift), step)
    return total / shift**p


def separate_ray(fields_by_order, c, ray: Ray) -> tuple[np.ndarray, np.ndarray]:
    """Separate ``sum_j c_j J^{r+j} F_j`` on one ray.

    ``fields_by_order[j]`` is the mixed field ``F_j``.  Returns the separated
    values and the directly computed ``(J^m F_m, .., J^0 F_0)`` for comparison.
    """
    m = len(fields_by_order) - 1
    c = _check_constants(m, c)
    rhs = np.zeros(m + 1, dtype=complex)
    for r in range(m + 1):
        for j, Fj in enumerate(fields_by_order):
            deriv = ray_derivative(Fj, ray.with_order(r + j), r, degree=r + j)
            rhs[r] += c[j] * deriv / ((-1) ** r * math.factorial(r))
    direct = np.array([forward_Jk(fields_by_order[j], ray.with_order(j)) for j in range(m, -1, -1)])
    return separate_components(rhs, m, c), direct


def random_bump_field(domain: GridDomain, m: int, rng, bumps: int = 3, width: float = 0.25,
                      radius: float = 0.5) -> TensorField:
    """Smooth random field: Gaussian bumps (cut off to an interior disc) with random tensor weights."""
    pts = domain.points()
    centre = (np.asarray(domain.origin) + domain.upper) / 2
    half = 0.5 * float(np.min(domain.upper - np.asarray(domain.origin)))
    r2 = np.sum((pts - centre) ** 2, axis=-1) / half**2
    cut = np.where(r2 < 0.81, np.exp(-1.0 / np.maximum(0.81 - r2, 1e-12)) * math.e ** (1 / 0.81), 0.0)
    vals = np.zeros(domain.shape + (tc.num_components(domain.n, m),), dtype=complex)
    for _ in range(bumps):
        c0 = centre + radius * half * rng.uniform(-1, 1, domain.n)
        g = np.exp(-np.sum((pts - c0) ** 2, axis=-1) / (width * half) ** 2)
        vals += (g * cut)[..., None] * rng.standard_normal(vals.shape[-1])
    return TensorField(domain, m, vals)


def kernel_relation_field(lower: dict[int, TensorField], m: int) -> list[TensorField]:
    """Mixed field of ranks 0..m satisfying the kernel relations of ``I^m``.

    ``lower`` maps the free ranks (even ranks below ``2*floor(m/2)`` and odd
    ranks below ``2*floor((m-1)/2)+1``) to fields; missing ones are zero.  The
    top even and top odd parts are fixed by
    ``f^(E) = -sum_l i_delta^{(E-2l+2)/2} f^(2l-2)`` and the analogue for odd ranks.
    """
    if m < 2:
        raise ValueError("the nontrivial kernel needs m >= 2")
    domain = next(iter(lower.values())).domain
    parts = [lower.get(p, TensorField.zeros(domain, p)) for p in range(m + 1)]
    for top in (2 * (m // 2), 2 * ((m - 1) // 2) + 1):
        acc = TensorField.zeros(domain, top)
        for r in range(top % 2, top, 2):
            lifts = (top - r) // 2
            acc = acc - parts[r].pointwise(_i_delta_power_matrix(domain.n, r, lifts), top)
        parts[top] = acc
    return parts


def _i_delta_power_matrix(n: int, r: int, k: int) -> np.ndarray:
    mat = np.eye(tc.num_components(n, r))
    for j in range(k):
        mat = tc.i_delta_matrix(n, r + 2 * j) @ mat
    return mat


def mixed_norm(parts) -> float:
    return math.sqrt(sum(f.norm() ** 2 for f in parts if f is not None))


@dataclass
class KernelReport:
    m: int
    n: int
    kernel_residuals: list = field(default_factory=list)
    nonkernel_residuals: list = field(default_factory=list)
    singular_values: tuple | None = None

    @property
    def kernel_max(self) -> float:
        return max(self.kernel_residuals, default=0.0)

    @property
    def nonkernel_min(self) -> float:
        return min(self.nonkernel_residuals, default=math.inf)

    @property
    def sv_ratio(self) -> float | None:
        if self.singular_values is None:
            return None
        return self.singular_values[0] / self.singular_values[1]

    def metrics(self) -> dict:
        out = {"m": self.m, "n": self.n}
        if self.kernel_residuals or self.nonkernel_residuals:
            out.update({"kernel_fields": len(self.kernel_residuals), "kernel_max_residual": self.kernel_max,
                        "nonkernel_fields": len(self.nonkernel_residuals),
                        "nonkernel_min_residual": self.nonkernel_min})
        if self.singular_values is not None:
            out["sigma_min"], out["sigma_max"] = self.singular_values
            out["sigma_ratio"] = self.sv_ratio
        return out


MAX_PROBE_UNKNOWNS = 4000


def kernel_probe(m: int, domain: GridDomain, rays=None, ray_count: int = 200, trials: int = 20,
                 seed: int = 0, svd_domain: GridDomain | None = None) -> KernelReport:
    """Residual probe of the kernel of ``I^m``.

    For ``m >= 2``: max over rays of ``|I^m F| / ||F||`` for fields built from
    the kernel relations, and for random fields with trace-free top part and
    zero scalar part (which makes them orthogonal to the kernel family).  For
    ``m <= 1``: extreme singular values of the transform matrix on
    ``svd_domain`` (default: the same grid).
    """
    if not 0 <= m <= 2:
        raise ValueError("kernel probe supports m <= 2")
    if domain.n > 3:
        raise ValueError("kernel probe supports n <= 3")
    rng = np.random.default_rng(seed)
    if rays is None:
        rays = equidistributed_rays(domain, ray_count, k=m, seed=seed)
    rays = [r.with_order(m) for r in rays]
    report = KernelReport(m, domain.n)
    if m >= 2:
        for _ in range(trials):
            lower = {p: random_bump_field(domain, p, rng) for p in range(m - 1)}
            F = kernel_relation_field(lower, m)
            scale = mixed_norm(F)
            report.kernel_residuals.append(max(abs(forward_Jk(F, r)) for r in rays) / scale)
        for _ in range(trials):
            F = [TensorField.zeros(domain, 0)]
            for p in range(1, m + 1):
                f = random_bump_field(domain, p, rng)
                if p == m:
                    f = f.pointwise(tc.projection_matrix(domain.n, p), p)
                F.append(f)
            scale = mixed_norm(F)
            F = [f * (1 / scale) for f in F]
            report.nonkernel_residuals.append(max(abs(forward_Jk(F, r)) for r in rays))
    else:
        sdom = svd_domain or domain
        unknowns = int(sdom.interior_mask().sum()) * math.comb(m + sdom.n, m)
        if unknowns > MAX_PROBE_UNKNOWNS:
            raise ValueError(f"{unknowns} unknowns exceed the probe limit {MAX_PROBE_UNKNOWNS}")
        srays = rays if svd_domain is None else equidistributed_rays(sdom, len(rays), k=m, seed=seed)
        mat = build_Im_matrix(sdom, m, srays)
        s = np.linalg.svd(mat, compute_uv=False)
        report.singular_values = (float(s[-1]), float(s[0]))
    return report
