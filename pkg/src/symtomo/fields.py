"""Symmetric-tensor fields on uniform box grids and their differential operators.

Values are stored structure-of-arrays: ``values[..., c]`` is component ``c`` (in
the lexicographic order of :mod:`symtomo.tensor_core`) at every grid point.
Derivatives are second order: central differences inside, second-order
one-sided differences on the faces (``boundary="one-sided"``), or central
differences against a zero ghost layer (``boundary="zero"``), which is the
variant whose divergence is exactly minus the adjoint of the symmetric
derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import romb

from . import tensor_core as tc

__all__ = [
    "GridDomain",
    "TensorField",
    "partial",
    "sym_derivative",
    "divergence",
    "iterated",
    "laplacian",
    "apply_coeff_op",
    "inner_integral",
    "integrate",
    "boundary_jets_vanish",
]

MAX_POINTS = 10**7


@dataclass(frozen=True)
class GridDomain:
    """Uniform grid over the box ``origin + [0, (shape-1)*spacing]``."""

    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        spacing = tuple(float(h) for h in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if not (len(shape) == len(spacing) == len(origin)) or not shape:
            raise ValueError("shape, spacing and origin must have the same positive length")
        if any(s < 2 for s in shape) or any(h <= 0 for h in spacing):
            raise ValueError("need at least 2 points and positive spacing per axis")
        if math.prod(shape) >= MAX_POINTS:
            raise ValueError(f"grid has {math.prod(shape)} points, limit is {MAX_POINTS}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def box(cls, n: int, points: int, lo: float = -1.0, hi: float = 1.0) -> GridDomain:
        h = (hi - lo) / (points - 1)
        return cls((points,) * n, (h,) * n, (lo,) * n)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(self.shape) - 1) * np.asarray(self.spacing)

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(s) for s, h, o in zip(self.shape, self.spacing, self.origin)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points, shape ``shape + (n,)``."""
        return np.stack(self.mesh(), axis=-1)

    def quadrature_weights(self, rule: str = "trapezoid") -> np.ndarray:
        """Tensor-product weights: ``"trapezoid"``, composite ``"simpson"`` or ``"romberg"``.

        Simpson needs an odd point count per axis; an even count falls back
        to a trapezoid step on the last cell of that axis.  Romberg needs
        ``2^k + 1`` points per axis and falls back to Simpson otherwise.
        """
        if rule not in ("trapezoid", "simpson", "romberg"):
            raise ValueError(f"unknown quadrature rule {rule!r}")
        w = np.ones(self.shape)
        for axis, (s, h) in enumerate(zip(self.shape, self.spacing)):
            w1 = np.full(s, h)
            w1[[0, -1]] = h / 2
            if rule == "romberg" and s >= 3 and (s - 1) & (s - 2) == 0:
                w1 = romb(np.eye(s), dx=h, axis=1)
            elif rule != "trapezoid" and s >= 3:
                k = s if s % 2 else s - 1
                w1[:k] = 0.0
                w1[:k:2] = 2 * h / 3
                w1[1:k:2] = 4 * h / 3
                w1[0] = w1[k - 1] = h / 3
                if k < s:
                    w1[k - 1] += h / 2
                    w1[k] = h / 2
            shape = [1] * self.n
            shape[axis] = s
            w = w * w1.reshape(shape)
        return w

    def interior_mask(self, margin: int = 1) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[tuple(slice(margin, s - margin) for s in self.shape)] = True
        return mask


@dataclass(frozen=True, eq=False)
class TensorField:
    domain: GridDomain
    m: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        ncomp = tc.num_components(self.domain.n, self.m)
        if vals.shape == self.domain.shape and ncomp == 1:
            vals = vals[..., None]
        if vals.shape != self.domain.shape + (ncomp,):
            raise ValueError(f"expected values of shape {self.domain.shape + (ncomp,)}, got {vals.shape}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.domain.n

    @classmethod
    def zeros(cls, domain: GridDomain, m: int) -> TensorField:
        return cls(domain, m, np.zeros(domain.shape + (tc.num_components(domain.n, m),), dtype=complex))

    @classmethod
    def from_function(cls, domain: GridDomain, m: int, func) -> TensorField:
        """``func(x_1, ..., x_n)`` returns an array ``shape + (ncomp,)`` (or ``shape`` for scalars)."""
        return cls(domain, m, func(*domain.mesh()))

    @classmethod
    def constant(cls, domain: GridDomain, t: tc.SymTensor) -> TensorField:
        return cls(domain, t.m, np.broadcast_to(t.comps, domain.shape + t.comps.shape))

    def at(self, index) -> tc.SymTensor:
        return tc.SymTensor(self.n, self.m, self.values[tuple(index)])

    def scalar_values(self) -> np.ndarray:
        if self.m != 0:
            raise ValueError("not a scalar field")
        return self.values[..., 0]

    def pointwise(self, matrix: np.ndarray, new_rank: int) -> TensorField:
        """Apply a compressed-coordinate matrix at every grid point."""
        return TensorField(self.domain, new_rank, self.values @ np.asarray(matrix).T)

    def _check(self, other: TensorField) -> None:
        if other.domain != self.domain or other.m != self.m:
            raise ValueError("fields must share domain and rank")

    def __add__(self, other: TensorField) -> TensorField:
        self._check(other)
        return TensorField(self.domain, self.m, self.values + other.values)

    def __sub__(self, other: TensorField) -> TensorField:
        self._check(other)
        return TensorField(self.domain, self.m, self.values - other.values)

    def __neg__(self) -> TensorField:
        return TensorField(self.domain, self.m, -self.values)

    def __mul__(self, c) -> TensorField:
        c = np.asarray(c)
        if c.ndim and c.shape == self.domain.shape:
            c = c[..., None]
        return TensorField(self.domain, self.m, self.values * c)

    __rmul__ = __mul__

    def norm(self) -> float:
        """Discrete L2 norm with trapezoid weights and multiplicity-weighted pointwise pairing."""
        return math.sqrt(max(inner_integral(self, self).real, 0.0))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0


def partial(values: np.ndarray, domain: GridDomain, axis: int, boundary: str = "one-sided") -> np.ndarray:
    """First derivative along ``axis`` of arrays shaped ``domain.shape + extra``."""
    h = domain.spacing[axis]
    if domain.shape[axis] < 3:
        raise ValueError("need at least 3 points along each differentiated axis")
    if boundary == "one-sided":
        return np.gradient(values, h, axis=axis, edge_order=2)
    if boundary == "zero":
        pad = [(0, 0)] * values.ndim
        pad[axis] = (1, 1)
        padded = np.pad(values, pad)
        hi = [slice(None)] * values.ndim
        lo = [slice(None)] * values.ndim
        hi[axis] = slice(2, None)
        lo[axis] = slice(None, -2)
        return (padded[tuple(hi)] - padded[tuple(lo)]) / (2 * h)
    raise ValueError(f"unknown boundary mode {boundary!r}")


def _check_size(domain: GridDomain) -> None:
    if min(domain.shape) < 5:
        raise ValueError("differential operators need at least 5 points per axis")


def sym_derivative(f: TensorField, boundary: str = "one-sided") -> TensorField:
    """Symmetrized gradient ``d f`` (rank m -> m+1)."""
    _check_size(f.domain)
    n, m = f.n, f.m
    out = np.zeros(f.domain.shape + (tc.num_components(n, m + 1),), dtype=complex)
    for a in range(n):
        out += partial(f.values, f.domain, a, boundary) @ tc._i_axis_matrix(n, m, a).T
    return TensorField(f.domain, m + 1, out)


def divergence(f: TensorField, boundary: str = "one-sided") -> TensorField:
    """Contracted derivative ``delta f`` (rank m -> m-1)."""
    if f.m < 1:
        raise ValueError("divergence needs rank >= 1")
    _check_size(f.domain)
    n, m = f.n, f.m
    out = np.zeros(f.domain.shape + (tc.num_components(n, m - 1),), dtype=complex)
    for a in range(n):
        out += partial(f.values, f.domain, a, boundary) @ tc._j_axis_matrix(n, m, a).T
    return TensorField(f.domain, m - 1, out)


def iterated(op: str, k: int, f: TensorField, boundary: str = "one-sided") -> TensorField:
    """``d^k f`` (``op="d"``) or ``delta^k f`` (``op="delta"``)."""
    if op == "d":
        step = sym_derivative
    elif op == "delta":
        if k > f.m:
            raise ValueError(f"cannot take {k} divergences of a rank-{f.m} field")
        step = divergence
    else:
        raise ValueError(f"op must be 'd' or 'delta', got {op!r}")
    for _ in range(k):
        f = step(f, boundary)
    return f


def laplacian(u: TensorField, boundary: str = "one-sided") -> TensorField:
    out = np.zeros_like(u.values)
    for a in range(u.n):
        out += partial(partial(u.values, u.domain, a, boundary), u.domain, a, boundary)
    return TensorField(u.domain, u.m, out)


def _derivative_tensors(u: TensorField, order: int, boundary: str) -> list[TensorField]:
    # d^l u for a scalar u holds the discrete partials of order l
    out = [u]
    for _ in range(order):
        out.append(sym_derivative(out[-1], boundary))
    return out


def apply_coeff_op(coeffs, u: TensorField, boundary: str = "one-sided") -> TensorField:
    """``sum_l a^l_{i1..il} D^{i1..il} u`` with ``D_j = -i d/dx_j``.

    ``coeffs[l]`` is a rank-``l`` field or ``None``.
    """
    if u.m != 0:
        raise ValueError("coefficient operators act on scalar fields")
    order = len(coeffs) - 1
    if order >= 1:
        _check_size(u.domain)
        if min(u.domain.shape) < order + 3:
            raise ValueError(f"grid too small for derivatives of order {order}")
    derivs = _derivative_tensors(u, order, boundary)
    out = np.zeros(u.domain.shape, dtype=complex)
    for l, a in enumerate(coeffs):
        if a is None:
            continue
        if a.m != l or a.domain != u.domain:
            raise ValueError(f"coefficient {l} must be a rank-{l} field on the same grid")
        w = tc.multiplicities(u.n, l)
        out += (-1j) ** l * np.sum(w * a.values * derivs[l].values, axis=-1)
    return TensorField(u.domain, 0, out)


def inner_integral(f: TensorField, g: TensorField) -> complex:
    """``integral <f(x), g(x)> dx`` with conjugation on ``g``."""
    f._check(g)
    w = tc.multiplicities(f.n, f.m)
    pointwise = np.sum(w * f.values * np.conj(g.values), axis=-1)
    return complex(np.sum(f.domain.quadrature_weights() * pointwise))


def integrate(values: np.ndarray, domain: GridDomain) -> complex:
    return complex(np.sum(domain.quadrature_weights() * values))


def _one_sided_weights(points: int) -> np.ndarray:
    """Rows ``j``: weights on nodes ``0..points-1`` for the j-th derivative at 0 (unit spacing)."""
    nodes = np.arange(points, dtype=float)
    V = np.vander(nodes, points, increasing=True).T
    rhs = np.diag([math.factorial(j) for j in range(points)]).astype(float)
    return np.linalg.solve(V, rhs).T


def boundary_jets_vanish(f: TensorField, order: int, threshold: float | None = None) -> tuple[bool, float]:
    """Check that normal derivatives ``0..order`` vanish on every face.

    One-sided stencils exact for polynomials of degree ``order + 6`` are
    applied from each face inward.  The order-``j`` value is taken relative
    to the largest ``j``-th difference quotient along that axis (at least
    ``1e-300``).  Returns ``(passed, worst residual)``, compared to
    ``10 h^2`` by default.
    """
    h = min(f.domain.spacing)
    if threshold is None:
        threshold = 10 * h * h
    points = order + 7
    weights = _one_sided_weights(points)
    worst = 0.0
    for axis in range(f.n):
        size = f.domain.shape[axis]
        if size < points:
            raise ValueError("grid too small for the requested jet order")
        hax = f.domain.spacing[axis]
        scales = []
        diffs = np.moveaxis(f.values, axis, 0)
        for j in range(order + 1):
            scales.append(max(float(np.abs(diffs).max()) / hax**j, 1e-300))
            diffs = np.diff(diffs, axis=0)
        for side in (0, 1):
            sl = [slice(None)] * f.values.ndim
            sl[axis] = slice(0, points) if side == 0 else slice(size - points, size)
            layers = np.moveaxis(f.values[tuple(sl)], axis, 0)
            if side == 1:
                layers = layers[::-1]
            for j in range(order + 1):
                deriv = np.tensordot(weights[j], layers, axes=(0, 0)) / hax**j
                worst = max(worst, float(np.abs(deriv).max()) / scales[j])
    return worst <= threshold, worst
