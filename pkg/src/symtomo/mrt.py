"""Momentum ray transforms of mixed symmetric tensor fields by line quadrature.

``J^k F(x, xi) = int t^k sum_p f(p)_{i1..ip}(x + t xi) xi^i1 .. xi^ip dt``.

Rays are clipped to the grid box with the slab method.  The quadrature
nodes sit on the lattice ``t in step * Z`` measured from the base point, so
shifting the base point along ``xi`` by a multiple of ``step`` reuses the
same physical sample points; finite differences in the base point are then
exact polynomial identities of the discrete transform.  Fields are assumed
to vanish on a one-cell margin, so trapezoid end corrections multiply zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor_core as tc
from .fields import GridDomain, TensorField

__all__ = [
    "Ray",
    "RaySample",
    "clip_ray",
    "line_nodes",
    "interpolation_weights",
    "contraction_weights",
    "field_domain",
    "forward_Jk",
    "forward_Ik",
    "transform_rays",
    "axis_moment_transform",
    "build_Im_matrix",
    "mixed_unknowns",
    "pack_mixed",
    "unpack_mixed",
    "equidistributed_rays",
    "MAX_MATRIX_ENTRIES",
]

MAX_MATRIX_ENTRIES = 10**7


@dataclass(frozen=True)
class Ray:
    x: tuple[float, ...]
    xi: tuple[float, ...]
    k: int = 0

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        xi = tuple(float(v) for v in self.xi)
        if len(x) != len(xi):
            raise ValueError("base point and direction must have the same dimension")
        if not any(xi):
            raise ValueError("ray direction must be nonzero")
        if self.k < 0:
            raise ValueError("momentum order must be non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self) -> int:
        return len(self.x)

    def is_unit(self, tol: float = 1e-12) -> bool:
        return abs(math.hypot(*self.xi) - 1.0) <= tol

    def with_order(self, k: int) -> Ray:
        return Ray(self.x, self.xi, k)

    def shifted(self, s: float) -> Ray:
        """Base point moved by ``s * xi``."""
        return Ray(tuple(np.asarray(self.x) + s * np.asarray(self.xi)), self.xi, self.k)


@dataclass(frozen=True)
class RaySample:
    ray: Ray
    value: complex
    step: float


def clip_ray(domain: GridDomain, x, xi) -> tuple[float, float] | None:
    """Parameter interval where ``x + t xi`` lies in the box, or ``None``."""
    lo, hi = np.asarray(domain.origin), domain.upper
    x, xi = np.asarray(x, float), np.asarray(xi, float)
    t0, t1 = -np.inf, np.inf
    for a in range(domain.n):
        if abs(xi[a]) < 1e-300:
            if x[a] < lo[a] or x[a] > hi[a]:
                return None
            continue
        ta, tb = (lo[a] - x[a]) / xi[a], (hi[a] - x[a]) / xi[a]
        t0, t1 = max(t0, min(ta, tb)), min(t1, max(ta, tb))
    if t0 > t1:
        return None
    return t0, t1


def default_step(domain: GridDomain, xi) -> float:
    """Parameter step: half the smallest spacing, in units of arclength / |xi|."""
    return min(domain.spacing) / 2 / float(np.linalg.norm(xi))


def line_nodes(domain: GridDomain, x, xi, step: float | None = None):
    """Lattice nodes ``t_j`` inside the box and their trapezoid weights."""
    if step is None:
        step = default_step(domain, xi)
    span = clip_ray(domain, x, xi)
    if span is None:
        return np.empty(0), np.empty(0)
    j0 = math.ceil(span[0] / step - 1e-9)
    j1 = math.floor(span[1] / step + 1e-9)
    if j1 < j0:
        return np.empty(0), np.empty(0)
    t = step * np.arange(j0, j1 + 1)
    w = np.full(t.shape, step)
    w[0] = w[-1] = step / 2
    if len(t) == 1:
        w[0] = 0.0
    return t, w


def interpolation_weights(domain: GridDomain, pts: np.ndarray):
    """Multilinear interpolation stencils.

    Returns ``(flat_index, weight)`` arrays of shape ``(npts, 2**n)``; points
    outside the box get zero weight.
    """
    pts = np.atleast_2d(np.asarray(pts, float))
    n = domain.n
    rel = (pts - np.asarray(domain.origin)) / np.asarray(domain.spacing)
    shape = np.asarray(domain.shape)
    inside = np.all((rel >= -1e-9) & (rel <= shape - 1 + 1e-9), axis=1)
    rel = np.clip(rel, 0, shape - 1)
    base = np.minimum(np.floor(rel).astype(int), shape - 2)
    frac = rel - base
    corners = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1).T
    idx = base[:, None, :] + corners[None, :, :]
    wts = np.prod(np.where(corners[None, :, :] == 1, frac[:, None, :], 1 - frac[:, None, :]), axis=2)
    wts = wts * inside[:, None]
    flat = np.ravel_multi_index(tuple(idx[..., a] for a in range(n)), domain.shape)
    return flat, wts


def contraction_weights(n: int, p: int, xi) -> np.ndarray:
    """Vector ``w`` with ``sum_J w_J f_J = f_{i1..ip} xi^i1..xi^ip``."""
    power = tc.i_vec_power(tc.SymTensor.scalar(1.0, n), np.asarray(xi, dtype=complex), p)
    return tc.multiplicities(n, p) * power.comps


def _as_parts(F) -> list[TensorField]:
    """A single field of rank ``m`` is the mixed field with only part ``m``; missing parts are ``None``."""
    if isinstance(F, TensorField):
        F = [None] * F.m + [F]
    parts = list(F)
    present = [f for f in parts if f is not None]
    if not present:
        raise ValueError("mixed field has no parts")
    for p, f in enumerate(parts):
        if f is not None and (f.m != p or f.domain != present[0].domain):
            raise ValueError(f"part {p} must be a rank-{p} field on a common grid")
    return parts


def field_domain(F) -> GridDomain:
    """Grid of a field or mixed field."""
    return next(f.domain for f in _as_parts(F) if f is not None)


def _line_integrand(parts, t, x, xi, contraction_vec=None) -> np.ndarray:
    domain = next(f.domain for f in parts if f is not None)
    pts = np.asarray(x)[None, :] + t[:, None] * np.asarray(xi)[None, :]
    flat, wts = interpolation_weights(domain, pts)
    cvec = xi if contraction_vec is None else contraction_vec
    total = np.zeros(len(t), dtype=complex)
    for p, f in enumerate(parts):
        if f is None:
            continue
        vals = f.values.reshape(-1, f.values.shape[-1])
        contracted = vals @ contraction_weights(domain.n, p, cvec)
        total += np.sum(wts * contracted[flat], axis=1)
    return total


def forward_Jk(F, ray: Ray, step: float | None = None) -> complex:
    """``J^k F(x, xi)`` for a field or a list of fields of ranks 0..m."""
    parts = _as_parts(F)
    domain = field_domain(parts)
    if ray.n != domain.n:
        raise ValueError("ray and grid dimensions differ")
    t, w = line_nodes(domain, ray.x, ray.xi, step)
    if t.size == 0:
        return 0j
    vals = _line_integrand(parts, t, ray.x, ray.xi)
    return complex(np.sum(w * t**ray.k * vals))


def forward_Ik(F, ray: Ray, step: float | None = None) -> complex:
    """Restricted transform; the direction must be a unit vector."""
    if not ray.is_unit():
        raise ValueError("I^k needs a unit direction")
    return forward_Jk(F, ray, step)


def transform_rays(F, rays, step: float | None = None) -> list[RaySample]:
    out = []
    for ray in rays:
        s = default_step(field_domain(F), ray.xi) if step is None else step
        out.append(RaySample(ray, forward_Jk(F, ray, s), s))
    return out


def _complement_frame(n: int, eta: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the complement of span(e_1, eta)."""
    e1 = np.zeros(n)
    e1[0] = 1.0
    basis = [e1, eta]
    for a in range(n):
        v = np.zeros(n)
        v[a] = 1.0
        for b in basis:
            v = v - (v @ b) * b
        if np.linalg.norm(v) > 1e-8:
            basis.append(v / np.linalg.norm(v))
    return np.array(basis[2:n])


def axis_moment_transform(f: TensorField, eta, x_perp=(), alpha: int = 0, x1: float = 0.0,
                          step: float | None = None) -> complex:
    """``int t^alpha f_{i1..im}(x1, t eta + x'') prod (e_1 + i eta)_{ij} dt``.

    The line lies in the hyperplane ``{x_1 = x1}``, runs along ``eta`` (unit,
    orthogonal to ``e_1``) and is offset by ``x'' = sum_j x_perp[j] * b_j``
    where ``b_j`` complete ``(e_1, eta)`` to an orthonormal frame.
    """
    n = f.n
    eta = np.asarray(eta, float)
    if eta.shape != (n,):
        raise ValueError("eta must live in the field's dimension")
    if abs(np.linalg.norm(eta) - 1.0) > 1e-10:
        raise ValueError("eta must be a unit vector")
    if abs(eta[0]) > 1e-10:
        raise ValueError("eta must be orthogonal to e_1")
    if alpha < 0:
        raise ValueError("weight power must be non-negative")
    frame = _complement_frame(n, eta)
    x_perp = np.asarray(x_perp, float).reshape(-1)
    if x_perp.shape != (len(frame),):
        raise ValueError(f"need {len(frame)} transverse coordinates, got {x_perp.shape[0]}")
    base = np.zeros(n)
    base[0] = x1
    if len(frame):
        base = base + x_perp @ frame
    zeta = eta * 1j
    zeta[0] += 1.0
    t, w = line_nodes(f.domain, base, eta, step)
    if t.size == 0:
        return 0j
    parts = [None] * f.m + [f]
    vals = _line_integrand(parts, t, base, eta, contraction_vec=zeta)
    return complex(np.sum(w * t**alpha * vals))


def mixed_unknowns(domain: GridDomain, m: int, margin: int = 1):
    """Column layout of the transform matrix: ``(rank, flat point, component)`` triples."""
    mask = domain.interior_mask(margin).ravel()
    pts = np.flatnonzero(mask)
    layout = []
    for p in range(m + 1):
        for c in range(tc.num_components(domain.n, p)):
            layout.append((p, c))
    return pts, layout


def build_Im_matrix(domain: GridDomain, m: int, rays, step: float | None = None,
                    sparse: bool = False, margin: int = 1, complex_dtype: bool = False):
    """Matrix of ``F -> (J^k F(ray))_rays`` on interior unknowns of a rank-<=m mixed field.

    Columns are ordered rank-major, then point, then component: column
    ``offset[p] + point_index * ncomp(p) + c``.  Use :func:`pack_mixed` to
    build the matching vector from fields.
    """
    rays = list(rays)
    pts, _ = mixed_unknowns(domain, m, margin)
    col_of_point = -np.ones(math.prod(domain.shape), dtype=int)
    col_of_point[pts] = np.arange(len(pts))
    ncomps = [tc.num_components(domain.n, p) for p in range(m + 1)]
    offsets = np.concatenate([[0], np.cumsum([len(pts) * c for c in ncomps])])
    ncols = int(offsets[-1])
    if not sparse and len(rays) * ncols > MAX_MATRIX_ENTRIES:
        raise MemoryError(f"dense matrix would have {len(rays) * ncols} entries")
    rows, cols, vals = [], [], []
    for r, ray in enumerate(rays):
        if ray.n != domain.n:
            raise ValueError("ray and grid dimensions differ")
        t, w = line_nodes(domain, ray.x, ray.xi, step)
        if t.size == 0:
            continue
        ptsl = np.asarray(ray.x)[None, :] + t[:, None] * np.asarray(ray.xi)[None, :]
        flat, wts = interpolation_weights(domain, ptsl)
        coef = (w * t**ray.k)[:, None] * wts
        local = col_of_point[flat]
        keep = (local >= 0) & (coef != 0)
        lp, lc = local[keep], coef[keep]
        for p in range(m + 1):
            cw = contraction_weights(domain.n, p, ray.xi)
            for c in range(ncomps[p]):
                if cw[c] == 0:
                    continue
                rows.append(np.full(lp.shape, r))
                cols.append(offsets[p] + lp * ncomps[p] + c)
                vals.append(lc * cw[c])
    dtype = complex if complex_dtype else float
    if rows:
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        vals = np.concatenate(vals)
        if not complex_dtype:
            vals = vals.real
    else:
        rows = cols = np.empty(0, int)
        vals = np.empty(0, dtype)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(len(rays), ncols), dtype=dtype).tocsr()
    return mat if sparse else mat.toarray()


def pack_mixed(F, margin: int = 1) -> np.ndarray:
    """Vector of interior unknowns in the column order of :func:`build_Im_matrix`."""
    parts = _as_parts(F)
    domain = field_domain(parts)
    parts = [TensorField.zeros(domain, p) if f is None else f for p, f in enumerate(parts)]
    mask = domain.interior_mask(margin)
    return np.concatenate([f.values[mask].ravel() for f in parts])


def unpack_mixed(vec, domain: GridDomain, m: int, margin: int = 1) -> list[TensorField]:
    mask = domain.interior_mask(margin)
    npts = int(mask.sum())
    out, pos = [], 0
    for p in range(m + 1):
        nc = tc.num_components(domain.n, p)
        vals = np.zeros(domain.shape + (nc,), dtype=complex)
        vals[mask] = np.asarray(vec[pos:pos + npts * nc]).reshape(npts, nc)
        pos += npts * nc
        out.append(TensorField(domain, p, vals))
    return out


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    golden = math.pi * (3 - math.sqrt(5))
    z = 1 - 2 * i / count
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(golden * i), r * np.sin(golden * i), z], axis=1)


def equidistributed_rays(domain: GridDomain, count: int, k: int = 0, seed: int = 0,
                         radius: float | None = None) -> list[Ray]:
    """Golden-angle (2-D) or Fibonacci (3-D) directions with random lateral offsets.

    Directions cover half the sphere evenly, are randomly rotated by the seed,
    and each ray passes at a uniformly drawn offset (within ``radius`` of the
    box centre, default the half-width of the box) orthogonal to its direction.
    """
    rng = np.random.default_rng(seed)
    n = domain.n
    centre = (np.asarray(domain.origin) + domain.upper) / 2
    if radius is None:
        radius = 0.5 * float(np.min(domain.upper - np.asarray(domain.origin)))
    if n == 2:
        golden = math.pi * (math.sqrt(5) - 1) / 2
        angles = (rng.uniform(0, math.pi) + golden * np.arange(count)) % math.pi
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    elif n == 3:
        dirs = _fibonacci_sphere(2 * count)
        dirs = dirs[dirs[:, 2] >= 0][:count]
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        dirs = dirs @ q.T
    else:
        dirs = rng.standard_normal((count, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rays = []
    for xi in dirs:
        off = rng.uniform(-radius, radius, size=n)
        off -= (off @ xi) * xi
        if n > 2:
            nrm = np.linalg.norm(off)
            target = radius * rng.uniform() ** (1 / (n - 1))
            off = off / nrm * target if nrm > 0 else off
        rays.append(Ray(tuple(centre + off), tuple(xi), k))
    return rays
