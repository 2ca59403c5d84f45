"""Coefficient sets, the linearized integral identity, gauge experiments and recovery demos.

Coefficient sets use the ``D = -i d/dx`` convention,
``Q u = sum_l a^l_{i1..il} D^{i1..il} u``; symbolic operators are stored in
``d/dx`` form and converted with ``a_D = i^l a_d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import sympy

from . import tensor_core as tc
from .fields import (GridDomain, TensorField, boundary_jets_vanish, iterated, partial,
                     _derivative_tensors)
from .mrt import line_nodes
from .mrt_algebra import separate_components, stencil_weights
from .symbolic import (Polynomial, PolyDiffOp, commutator, conjugate_exp,
                       extract_coeff_exact, gauge_top_coefficient, polyharmonic_op,
                       to_coeff)

__all__ = [
    "CoefficientSet",
    "IdentityReport",
    "integral_identity",
    "cgo_identity",
    "polyharmonic_basis",
    "cutoff_polynomial",
    "gauge_operators",
    "gauge_experiment",
    "hypothesis_check",
    "rotated_gradient_field",
    "ball_bump",
    "tracefree_bump",
    "pure_gauge_set",
    "default_gauge_phi",
    "gauge_vector",
    "DemoConfig",
    "moment_recovery_demo",
    "demo_normal_equations",
    "solve_demo",
]


@dataclass
class CoefficientSet:
    m: int
    fields: list
    jet_flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("operator half-order must be >= 1")
        fields = list(self.fields) + [None] * (2 * self.m - len(self.fields))
        if len(fields) != 2 * self.m:
            raise ValueError(f"need at most {2 * self.m} coefficient fields")
        domains = {f.domain for f in fields if f is not None}
        if len(domains) > 1:
            raise ValueError("coefficients must share one grid")
        for l, f in enumerate(fields):
            if f is not None and f.m != l:
                raise ValueError(f"coefficient {l} must have rank {l}")
        self.fields = fields

    @property
    def domain(self) -> GridDomain | None:
        return next((f.domain for f in self.fields if f is not None), None)

    @classmethod
    def zeros(cls, domain: GridDomain, m: int) -> CoefficientSet:
        return cls(m, [TensorField.zeros(domain, l) for l in range(2 * m)])

    @classmethod
    def from_operator(cls, Q: PolyDiffOp, domain: GridDomain, m: int, orders=None) -> CoefficientSet:
        """Sample a ``d/dx``-form operator of order < 2m as D-convention coefficients.

        ``orders`` restricts sampling to some ranks; the others are left ``None``.
        """
        if Q.order >= 2 * m:
            raise ValueError(f"operator order {Q.order} must be below {2 * m}")
        mesh = domain.mesh()
        fields = []
        for l in range(2 * m):
            if orders is not None and l not in orders:
                fields.append(None)
                continue
            exact = extract_coeff_exact(Q, l)
            vals = np.stack([exact[J](*mesh) for J in tc.sym_indices(domain.n, l)], axis=-1)
            fields.append(TensorField(domain, l, (1j) ** l * vals))
        return cls(m, fields)

    def scaled(self, c) -> CoefficientSet:
        return CoefficientSet(self.m, [None if f is None else f * c for f in self.fields], dict(self.jet_flags))

    def __add__(self, other: CoefficientSet) -> CoefficientSet:
        if other.m != self.m:
            raise ValueError("orders differ")
        out = []
        for a, b in zip(self.fields, other.fields):
            out.append(b if a is None else a if b is None else a + b)
        return CoefficientSet(self.m, out)

    def max_abs(self) -> float:
        return max((f.max_abs() for f in self.fields if f is not None), default=0.0)

    def is_zero(self, atol: float = 0.0) -> bool:
        return self.max_abs() <= atol

    def d_form(self, l: int) -> TensorField | None:
        """Coefficient ``l`` in ``d/dx`` form."""
        f = self.fields[l]
        return None if f is None else f * (-1j) ** l


@dataclass(frozen=True)
class IdentityReport:
    value: complex
    tolerance: float
    scale: float
    descriptor: str = ""

    @property
    def relative(self) -> float:
        return abs(self.value) / self.scale if self.scale > 0 else abs(self.value)

    @property
    def passed(self) -> bool:
        return abs(self.value) <= self.tolerance * max(self.scale, 1e-300) or self.scale == 0


def _d_tensors_exact(u: Polynomial, order: int, domain: GridDomain) -> list[np.ndarray]:
    mesh = domain.mesh()
    out = []
    for l in range(order + 1):
        comps = []
        for J in tc.sym_indices(domain.n, l):
            alpha = [0] * domain.n
            for a in J:
                alpha[a] += 1
            comps.append(u.diff_multi(alpha)(*mesh))
        out.append(np.stack(comps, axis=-1))
    return out


def _scalar_values(v, domain: GridDomain) -> np.ndarray:
    if isinstance(v, Polynomial):
        return v(*domain.mesh())
    if isinstance(v, TensorField):
        if v.domain != domain:
            raise ValueError("field lives on a different grid")
        return v.scalar_values()
    return np.broadcast_to(np.asarray(v, dtype=complex), domain.shape)


def integral_identity(coeffs: CoefficientSet, u, v, tolerance: float | None = None,
                      descriptor: str = "", rule: str = "romberg") -> IdentityReport:
    """``int sum_l a^l . D^l u v dx`` by grid quadrature (Romberg where the grid allows).

    ``u`` and ``v`` are Polynomials (exact derivatives) or scalar fields
    (finite differences).  The scale is ``int sum_l |a^l . D^l u v|``; the
    default tolerance is ``h^2`` for the smallest spacing.
    """
    domain = coeffs.domain
    if domain is None:
        return IdentityReport(0j, 0.0, 0.0, descriptor)
    order = 2 * coeffs.m - 1
    if isinstance(u, Polynomial):
        derivs = _d_tensors_exact(u, order, domain)
    else:
        if u.domain != domain or u.m != 0:
            raise ValueError("u must be a scalar field on the coefficient grid")
        if min(domain.shape) < order + 3:
            raise ValueError("grid too small for the derivative order")
        derivs = [f.values for f in _derivative_tensors(u, order, "one-sided")]
    vv = _scalar_values(v, domain)
    w = domain.quadrature_weights(rule)
    total = 0j
    scale = 0.0
    for l, a in enumerate(coeffs.fields):
        if a is None:
            continue
        term = (-1j) ** l * np.sum(tc.multiplicities(domain.n, l) * a.values * derivs[l], axis=-1) * vv
        total += complex(np.sum(w * term))
        scale += float(np.sum(w * np.abs(term)))
    if tolerance is None:
        tolerance = min(domain.spacing) ** 2
    return IdentityReport(total, tolerance, scale, descriptor)


def cgo_identity(coeffs_op: PolyDiffOp, zeta, h, a0: Polynomial, b0: Polynomial, domain: GridDomain) -> complex:
    """``int Q(e^{zeta.x/h} a0) e^{-zeta.x/h} b0 dx`` with exact phase cancellation.

    ``Q`` is a ``d/dx``-form operator; ``a0``, ``b0`` are in x coordinates.
    The conjugated operator ``e^{-psi} Q e^{psi}`` (``psi = zeta.x/h``) is
    formed exactly, so the integrand is a polynomial sampled on the grid.
    """
    psi = Polynomial.linear([to_coeff(complex(z)) * to_coeff(1 / sympy.nsimplify(h)) for z in zeta])
    conj = conjugate_exp(coeffs_op, psi)
    integrand = conj(a0) * b0
    return complex(np.sum(domain.quadrature_weights() * integrand(*domain.mesh())))


def _harmonic_homogeneous(n: int, degree: int) -> list[Polynomial]:
    monos = tc.sym_indices(n, degree)
    targets = tc.sym_indices(n, degree - 2) if degree >= 2 else ()
    if not targets:
        return [_monomial(n, J) for J in monos]
    col = {J: i for i, J in enumerate(monos)}
    row = {J: i for i, J in enumerate(targets)}
    mat = sympy.zeros(len(targets), len(monos))
    for J in monos:
        p = _monomial(n, J).laplacian()
        for exps, c in p.terms.items():
            idx = tuple(a for a, e in enumerate(exps) for _ in range(e))
            mat[row[idx], col[J]] += sympy.Rational(int(c.x.numerator), int(c.x.denominator))
    out = []
    for vec in mat.nullspace():
        vec = vec * sympy.ilcm(*[sympy.fraction(x)[1] for x in vec])
        out.append(sum((_monomial(n, J) * to_coeff(vec[i]) for J, i in col.items() if vec[i] != 0),
                       Polynomial.zero(n)))
    return out


def _monomial(n: int, J) -> Polynomial:
    exps = [0] * n
    for a in J:
        exps[a] += 1
    return Polynomial(n, {tuple(exps): 1})


def polyharmonic_basis(m: int, max_degree: int, n: int, count: int | None = None) -> list[Polynomial]:
    """``|x|^{2j} h`` for harmonic homogeneous ``h`` and ``j < m``, each checked to satisfy ``Delta^m p = 0``."""
    if max_degree > 8:
        raise ValueError("degree cap is 8")
    r2 = sum((Polynomial.coordinate(a, n) ** 2 for a in range(n)), Polynomial.zero(n))
    op = polyharmonic_op(m, n)
    out = []
    for total in range(max_degree + 1):
        for j in range(m):
            d = total - 2 * j
            if d < 0:
                continue
            for h in _harmonic_homogeneous(n, d):
                p = r2**j * h
                if not op(p).is_zero():
                    raise ArithmeticError("basis element is not polyharmonic")
                out.append(p)
                if count is not None and len(out) == count:
                    return out
    if count is not None:
        raise ValueError(f"only {len(out)} basis elements up to degree {max_degree}")
    return out


def cutoff_polynomial(core: Polynomial, power: int) -> Polynomial:
    """``core * prod_a (1 - x_a^2)^power``: vanishes with its first ``power - 1`` normal derivatives on the faces of ``[-1, 1]^n``."""
    n = core.n
    out = core
    for a in range(n):
        out = out * (1 - Polynomial.coordinate(a, n) ** 2) ** power
    return out


def gauge_operators(m: int, phi: Polynomial, min_order: int = 0) -> tuple[PolyDiffOp, PolyDiffOp]:
    """``(e^{-phi}(-Delta)^m e^{phi} - (-Delta)^m, [(-Delta)^m, phi])``.

    ``min_order`` truncates the conjugation to terms of at least that order.
    """
    P = polyharmonic_op(m, phi.n)
    return conjugate_exp(P, phi, min_order) - P, commutator(P, phi)


def gauge_experiment(m: int, phi: Polynomial, domain: GridDomain, basis_count: int = 20,
                     tolerance: float | None = None) -> dict:
    """Check the gauge shift of the top coefficient and the vanishing of the linearized identity.

    The identity uses the commutator (the part of the conjugation linear in
    ``phi``) over all ordered pairs from a polyharmonic basis.
    """
    if m not in (2, 3):
        raise ValueError("gauge experiment supports m in {2, 3}")
    full, linear = gauge_operators(m, phi, min_order=2 * m - 1)
    top = extract_coeff_exact(full, 2 * m - 1)
    expected = gauge_top_coefficient(phi, m)
    top_exact = all(top[J] == expected[J] for J in top)
    principal_kept = not full.homogeneous_part(2 * m)
    const = Polynomial.constant(7, phi.n)
    const_zero = not (conjugate_exp(polyharmonic_op(m, phi.n), const) - polyharmonic_op(m, phi.n)).terms
    coeffs = CoefficientSet.from_operator(linear, domain, m)
    degree = 1
    while True:
        try:
            basis = polyharmonic_basis(m, degree, phi.n, basis_count)
            break
        except ValueError:
            degree += 1
    worst, worst_scale = 0.0, 0.0
    passed = True
    for i, u in enumerate(basis):
        for j, v in enumerate(basis):
            rep = integral_identity(coeffs, u, v, tolerance)
            passed &= rep.passed
            if rep.relative >= worst:
                worst, worst_scale = rep.relative, rep.scale
    phi_field = phi.on_grid(domain)
    jets_ok, jets_res = boundary_jets_vanish(phi_field, 2 * m - 1)
    return {
        "m": m,
        "phi": phi.to_text() if len(phi.terms) < 12 else f"<{len(phi.terms)} terms, degree {phi.degree}>",
        "top_coefficient_exact": top_exact,
        "principal_part_unchanged": principal_kept,
        "constant_phi_gives_zero": const_zero,
        "basis_size": len(basis),
        "pairs": len(basis) ** 2,
        "identity_max_relative": worst,
        "identity_scale_at_max": worst_scale,
        "identity_tolerance": tolerance if tolerance is not None else min(domain.spacing) ** 2,
        "identity_passed": bool(passed),
        "phi_boundary_jets_ok": jets_ok,
        "phi_boundary_jet_residual": jets_res,
    }


def _full_derivative_norm(f: TensorField, order: int) -> float:
    # sqrt(sum over ordered derivative tuples of |d^beta f|^2), multiplicity-weighted pointwise
    total = 0.0
    frontier = [f.values]
    for _ in range(order):
        frontier = [partial(v, f.domain, a) for v in frontier for a in range(f.n)]
    w = tc.multiplicities(f.n, f.m)
    for v in frontier:
        total += float(np.sum(w * np.abs(v) ** 2))
    return math.sqrt(total)


def hypothesis_check(coeffs: CoefficientSet, which: str, threshold: float | None = None) -> tuple[bool, float]:
    """Residual of a hypothesis on the top coefficient ``a^{2m-1}``.

    ``"trace-free"``: ``max |j_delta a|`` relative to ``max |a|`` (default
    threshold 1e-10).  ``"div-free"``: ``|delta^{2m-1} a|`` relative to the
    norm of all derivatives of that order (default ``50 h^2``).
    ``"boundary-jets"``: normal derivatives of orders ``0..2m-1`` on the
    faces (default ``10 h^2``).
    """
    m = coeffs.m
    a = coeffs.fields[2 * m - 1]
    if a is None:
        return True, 0.0
    h = min(a.domain.spacing)
    scale = max(a.max_abs(), 1e-300)
    if which == "trace-free":
        if a.m < 2:
            return True, 0.0
        res = a.pointwise(tc.j_delta_matrix(a.n, a.m), a.m - 2).max_abs() / scale
        thr = 1e-10 if threshold is None else threshold
    elif which == "div-free":
        div = iterated("delta", a.m, a)
        full = _full_derivative_norm(a, a.m)
        res = float(np.linalg.norm(div.values)) / max(full, 1e-300)
        thr = 50 * h * h if threshold is None else threshold
    elif which == "boundary-jets":
        ok, res = boundary_jets_vanish(a, 2 * m - 1, threshold)
        return ok, res
    else:
        raise ValueError(f"unknown hypothesis {which!r}")
    return res <= thr, res


def rotated_gradient_field(psi: Polynomial, m: int, domain: GridDomain, direction=(1.0, 0.0)) -> TensorField:
    """``sym(R grad psi (x) c^{2m-2})`` in 2-D: ``delta^{2m-1}`` of it vanishes identically."""
    if psi.n != 2 or domain.n != 2:
        raise ValueError("rotated gradient construction is two-dimensional")
    mesh = domain.mesh()
    rot = np.stack([psi.diff(1)(*mesh), -psi.diff(0)(*mesh)], axis=-1)
    c = np.asarray(direction, dtype=complex)
    mat = np.eye(2)
    for r in range(1, 2 * m - 1):
        mat = tc.i_vec_matrix(2, r, c) @ mat
    return TensorField(domain, 2 * m - 1, rot @ mat.T)


# phantoms

def _smooth_step(r2: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = np.exp(1 - 1 / (1 - r2[inside]))
    return out


def ball_bump(domain: GridDomain, radius: float = 1.0, width: float = 0.25, centre=None) -> TensorField:
    """Smooth scalar equal to 1 on the ball and 0 beyond ``radius + width``."""
    pts = domain.points()
    c = np.zeros(domain.n) if centre is None else np.asarray(centre, float)
    r = np.linalg.norm(pts - c, axis=-1)
    s = np.clip((r - radius) / width, 0, 1)
    a = np.where(s < 1, np.exp(-1 / np.maximum(1 - s, 1e-300)), 0.0)
    b = np.where(s > 0, np.exp(-1 / np.maximum(s, 1e-300)), 0.0)
    return TensorField(domain, 0, a / (a + b))


def tracefree_bump(domain: GridDomain, m: int, radius: float = 0.5, centre=None, seed: int = 0) -> TensorField:
    """Compactly supported bump times a fixed random real trace-free tensor of rank ``m``."""
    rng = np.random.default_rng(seed)
    t = tc.projection_p(tc.SymTensor.random(domain.n, m, rng, complex_values=False))
    t = t / t.norm()
    pts = domain.points()
    c = np.zeros(domain.n) if centre is None else np.asarray(centre, float)
    bump = _smooth_step(np.sum((pts - c) ** 2, axis=-1) / radius**2)
    return TensorField(domain, m, bump[..., None] * t.comps)


def default_gauge_phi(n: int, m: int) -> Polynomial:
    return cutoff_polynomial(Polynomial.parse("1 + x1/2 - x2^2/3", n), 2 * m)


def pure_gauge_set(domain: GridDomain, m: int, phi: Polynomial | None = None, linear: bool = True,
                   orders=None) -> CoefficientSet:
    """Coefficients of ``[(-Delta)^m, phi]`` (or the full conjugation) for a box-supported polynomial ``phi``."""
    if phi is None:
        phi = default_gauge_phi(domain.n, m)
    P = polyharmonic_op(m, phi.n)
    op = commutator(P, phi) if linear else conjugate_exp(P, phi) - P
    return CoefficientSet.from_operator(op, domain, m, orders)


# moment recovery demo (m = 2, n = 3)

@dataclass(frozen=True)
class DemoConfig:
    directions: int = 64
    offsets: int | None = None
    damping: float = 1e-10
    data_refinement: int = 4
    data_order: int = 6
    points: int | None = None
    max_unknowns: int = 6000


def _lagrange_weights(domain: GridDomain, pts: np.ndarray, order: int = 4):
    """Tensor-product ``order``-point Lagrange interpolation stencils; zero weight outside the box."""
    pts = np.atleast_2d(pts)
    n = domain.n
    shape = np.asarray(domain.shape)
    if shape.min() < order:
        raise ValueError("grid too small for the interpolation order")
    rel = (pts - np.asarray(domain.origin)) / np.asarray(domain.spacing)
    inside = np.all((rel >= -1e-9) & (rel <= shape - 1 + 1e-9), axis=1)
    base = np.clip(np.floor(rel).astype(int) - (order // 2 - 1), 0, shape - order)
    frac = rel - base
    nodes = np.arange(order)
    axis_w = []
    for a in range(n):
        x = frac[:, a]
        w = np.ones((len(pts), order))
        for j in nodes:
            for k in nodes:
                if k != j:
                    w[:, j] *= (x - k) / (j - k)
        axis_w.append(w)
    offs = np.array(np.meshgrid(*[nodes] * n, indexing="ij")).reshape(n, -1).T
    wts = np.ones((len(pts), len(offs)))
    for a in range(n):
        wts *= axis_w[a][:, offs[:, a]]
    idx = base[:, None, :] + offs[None, :, :]
    flat = np.ravel_multi_index(tuple(idx[..., a] for a in range(n)), domain.shape)
    return flat, wts * inside[:, None]


def _line_moment_operator(domain2: GridDomain, eta2: np.ndarray, offsets: np.ndarray, alpha: int,
                          origin_shift: float = 0.0, refinement: int = 1, order: int = 4) -> sp.csr_matrix:
    """Rows: ``int (t - s)^alpha g(offset * perp + t * eta) dt`` for scalar grid values ``g``.

    ``g`` is taken to vanish with its first derivatives on the box faces, so
    every lattice node gets the full step (the trapezoid rule for the
    zero extension).
    """
    perp = np.array([-eta2[1], eta2[0]])
    step = min(domain2.spacing) / 2 / refinement
    rows, cols, vals = [], [], []
    for r, off in enumerate(offsets):
        base = off * perp
        t, _ = line_nodes(domain2, base, eta2, step)
        if t.size == 0:
            continue
        w = np.full(t.shape, step)
        pts = base[None, :] + t[:, None] * eta2[None, :]
        flat, wts = _lagrange_weights(domain2, pts, order)
        coef = (w * (t - origin_shift) ** alpha)[:, None] * wts
        keep = coef != 0
        rows.append(np.full(int(keep.sum()), r))
        cols.append(flat[keep])
        vals.append(coef[keep])
    shape = (len(offsets), math.prod(domain2.shape))
    if not rows:
        return sp.csr_matrix(shape)
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape).tocsr()


def _x1_integrate(values: np.ndarray, domain: GridDomain) -> np.ndarray:
    """Trapezoid integral over the first axis; returns values on the remaining grid."""
    h = domain.spacing[0]
    w = np.full(domain.shape[0], h)
    w[[0, -1]] = h / 2
    return np.tensordot(w, values, axes=(0, 0))


def _zeta_contraction(eta3: np.ndarray, rank: int) -> np.ndarray:
    zeta = 1j * eta3
    zeta[0] += 1
    return tc.multiplicities(3, rank) * tc.i_vec_power(tc.SymTensor.scalar(1.0, 3), zeta, rank).comps


def gauge_vector(a3: TensorField) -> TensorField:
    """``w`` with ``a3 = i_delta w`` (least-squares pointwise)."""
    jd = a3.pointwise(tc.j_delta_matrix(a3.n, 3), 1)
    return jd.pointwise(np.linalg.inv(tc.jdelta_idelta_matrix(a3.n, 1)), 1)


def moment_recovery_demo(c2: TensorField, w: TensorField | None = None, config: DemoConfig = DemoConfig()) -> dict:
    """Recover the trace-free part of the ``x_1``-integrated order-2 coefficient from moment data.

    ``c2`` is the d/dx-form order-2 coefficient on a 3-D grid and ``w`` the
    vector with order-3 coefficient ``i_delta w`` (or ``None``).  For each
    direction ``eta`` in the ``x'`` plane and each line offset, the leading
    term of the bilinear identity with amplitudes ``a0 = y_2 g``,
    ``b0 = y_2^k`` gives

        data_k = J^{1+k}[C : zeta zeta] + 2i J^k[W . zeta],  k = 0, 1,

    with ``C``, ``W`` the ``x_1`` integrals.  The two orders are separated
    (constants ``c_0 = 2i``, ``c_1 = 1``; the line derivative is a central
    difference over shifted moment origins) to give the ``W``-free
    ``J^1[C : zeta zeta]``.  That and ``data_1`` are inverted by damped
    normal equations for a trace-free ``C`` on the interior ``x'`` grid.

    The data side uses ``data_order``-point Lagrange interpolation on the
    coefficient grid and a line step ``data_refinement`` times finer than
    the inversion model, which uses 4-point stencils on a grid of
    ``points`` per axis (default: the coefficient grid).
    """
    system = demo_normal_equations(c2, w, config)
    return solve_demo(system, config.damping)


def demo_normal_equations(c2: TensorField, w: TensorField | None = None, config: DemoConfig = DemoConfig()) -> dict:
    """Assemble the demo's real normal equations; see :func:`moment_recovery_demo`."""
    dom3 = c2.domain
    if dom3.n != 3 or c2.m != 2:
        raise ValueError("demo needs an order-2 coefficient in three dimensions")
    if max(dom3.shape) > 65:
        raise ValueError("data grid limited to 65 points per axis")
    domd = GridDomain(dom3.shape[1:], dom3.spacing[1:], dom3.origin[1:])
    points = config.points or dom3.shape[1]
    stride = (dom3.shape[1] - 1) // (points - 1)
    if len(set(dom3.shape)) != 1 or stride * (points - 1) != dom3.shape[1] - 1:
        raise ValueError("data grid must be a cube refining the inversion grid by an integer factor")
    if points > 33:
        raise ValueError("inversion grid limited to 33 points per axis")
    dom2 = GridDomain((points,) * 2, (domd.spacing[0] * stride,) * 2, domd.origin)
    npts = math.prod(dom2.shape)
    Cd = _x1_integrate(c2.values, dom3).reshape(-1, 6)
    W = (_x1_integrate(w.values, dom3) if w is not None else np.zeros(domd.shape + (3,), complex)).reshape(-1, 3)
    sub = (slice(None, None, stride),) * 2
    reference = (Cd.reshape(domd.shape + (6,))[sub].reshape(npts, 6)) @ tc.projection_matrix(3, 2).T
    noff = config.offsets or 2 * dom2.shape[0] - 1
    half = 0.5 * float((dom2.upper - np.asarray(dom2.origin)).min())
    offsets = np.linspace(-half, half, noff)
    h = min(dom2.spacing)
    basis = np.linalg.svd(tc.projection_matrix(3, 2))[0][:, :5]
    icols = np.flatnonzero(dom2.interior_mask(2).ravel())
    if 5 * len(icols) > config.max_unknowns:
        raise MemoryError(f"{5 * len(icols)} unknowns exceed the dense limit {config.max_unknowns}")
    nodes, sw = stencil_weights(1, 2)
    data_ref = config.data_refinement
    normal = np.zeros((5 * len(icols),) * 2)
    rhs_vec = np.zeros(5 * len(icols))
    sep_f0, data_max = 0.0, 0.0
    rows, data = [], []
    for q in range(config.directions):
        theta = 2 * math.pi * q / config.directions
        eta2 = np.array([math.cos(theta), math.sin(theta)])
        eta3 = np.array([0.0, *eta2])
        z2 = _zeta_contraction(eta3, 2)
        cz, wz = Cd @ z2, W @ _zeta_contraction(eta3, 1)
        shifted = {}
        for k, shifts in ((0, (0,)), (1, nodes)):
            for s in shifts:
                m1 = _line_moment_operator(domd, eta2, offsets, 1 + k, s * h, data_ref, config.data_order)
                m0 = _line_moment_operator(domd, eta2, offsets, k, s * h, data_ref, config.data_order)
                shifted[k, s] = m1 @ cz + 2j * (m0 @ wz)
        d0, d1 = shifted[0, 0], shifted[1, 0]
        # weights (t - s)^alpha give the data at the base point moved by s along eta
        line_derivative = sum(wi * shifted[1, s] for s, wi in zip(nodes, sw)) / h
        sep = separate_components(np.stack([d0, line_derivative / (-1)]), 1, (2j, 1.0))
        sep_f0 = max(sep_f0, float(np.abs(sep[1]).max()))
        data_max = max(data_max, float(np.abs(d0).max()), float(np.abs(d1).max()))
        coef = basis.T @ z2
        for alpha, rhs in ((1, sep[0]), (2, d1)):
            op = _line_moment_operator(dom2, eta2, offsets, alpha)[:, icols].toarray()
            block = np.concatenate([op * coef[j] for j in range(5)], axis=1)
            rows.append(np.concatenate([block.real, block.imag]))
            data.append(np.concatenate([rhs.real, rhs.imag]))
        if len(rows) >= 32 or q == config.directions - 1:
            A = np.ascontiguousarray(np.concatenate(rows))
            normal += A.T @ A
            rhs_vec += A.T @ np.concatenate(data)
            rows, data = [], []
    return {"normal": normal, "rhs": rhs_vec, "basis": basis, "icols": icols, "reference": reference,
            "domain": dom2, "grid": "x".join(map(str, dom3.shape)), "directions": config.directions,
            "offsets": noff, "separated_order0_max": sep_f0, "data_max": data_max}


def solve_demo(system: dict, damping: float) -> dict:
    """Damped solve of assembled demo equations; damping is relative to the mean diagonal."""
    normal, basis, icols, reference = system["normal"], system["basis"], system["icols"], system["reference"]
    dom2 = system["domain"]
    npts = math.prod(dom2.shape)
    mu = damping * np.trace(normal) / normal.shape[0]
    x = sla.solve(normal + mu * np.eye(normal.shape[0]), system["rhs"], assume_a="pos")
    coeffs = np.zeros((npts, 5))
    coeffs[icols] = x.reshape(5, -1).T
    recon = coeffs @ basis.T
    weights = tc.multiplicities(3, 2)

    def wnorm(v):
        return math.sqrt(float(np.sum(weights * np.abs(v) ** 2)))

    ref_norm = wnorm(reference)
    return {
        "grid": system["grid"],
        "directions": system["directions"],
        "offsets": system["offsets"],
        "unknowns": normal.shape[0],
        "damping": mu,
        "reference_norm": ref_norm,
        "recovered_norm": wnorm(recon),
        "relative_error": wnorm(recon - reference) / ref_norm if ref_norm > 0 else float("nan"),
        "separated_order0_max": system["separated_order0_max"],
        "data_max": system["data_max"],
        "recovered": recon.reshape(dom2.shape + (6,)),
        "reference": reference.reshape(dom2.shape + (6,)),
    }
