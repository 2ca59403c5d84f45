"""Exact polynomial differential operators, exponential conjugation and CGO amplitudes.

Coefficients are Gaussian rationals (sympy's ``QQ_I``), so compositions,
conjugations and coefficient extraction are exact.  Operators are written in
``d/dx`` form, ``P = sum_alpha c_alpha(x) d^alpha``; tensors extracted from
them follow the same convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np
import sympy
from sympy.parsing.sympy_parser import parse_expr, rationalize, standard_transformations
from sympy.polys.domains import QQ, QQ_I

from . import tensor_core as tc
from .fields import GridDomain, TensorField

__all__ = [
    "to_coeff",
    "coeff_to_complex",
    "Polynomial",
    "PolyDiffOp",
    "op_apply",
    "op_compose",
    "multiply_op",
    "derivative_op",
    "laplacian_op",
    "polyharmonic_op",
    "conjugate_exp",
    "commutator",
    "extract_coeff_tensor",
    "extract_coeff_exact",
    "exact_sym_with_delta",
    "gauge_top_coefficient",
    "CgoParams",
    "complete_frame",
    "transport_apply",
    "dzbar_apply",
    "z_poly",
    "cgo_pair",
    "MAX_ORDER",
]

MAX_ORDER = 16


def to_coeff(value):
    """Convert ints, Fractions, floats, complex numbers or strings to ``QQ_I``."""
    if isinstance(value, type(QQ_I.zero)):
        return value
    if isinstance(value, complex):
        return QQ_I(_to_qq(value.real), _to_qq(value.imag))
    if isinstance(value, sympy.Basic):
        re, im = value.as_real_imag()
        return QQ_I(_to_qq(sympy.Rational(re)), _to_qq(sympy.Rational(im)))
    return QQ_I(_to_qq(value), QQ(0))


def _to_qq(value):
    if isinstance(value, sympy.Rational):
        return QQ(int(value.p), int(value.q))
    frac = Fraction(value) if not isinstance(value, str) else Fraction(value)
    return QQ(frac.numerator, frac.denominator)


def coeff_to_complex(c) -> complex:
    return complex(float(c.x), float(c.y))


def _frac(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def _format_rational(q) -> str:
    f = _frac(q)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def _format_coeff(c) -> str:
    if c.y == 0:
        return _format_rational(c.x)
    if c.x == 0:
        return f"({_format_rational(c.y)}*I)"
    return f"({_format_rational(c.x)} + {_format_rational(c.y)}*I)"


def _add_exps(a, b):
    return tuple(i + j for i, j in zip(a, b))


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial in ``x1..xn`` with exact Gaussian-rational coefficients."""

    n: int
    terms: dict

    def __post_init__(self):
        clean = {}
        for exps, c in dict(self.terms).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.n or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent {exps} for dimension {self.n}")
            c = to_coeff(c)
            if c:
                clean[exps] = clean.get(exps, QQ_I.zero) + c
        object.__setattr__(self, "terms", {k: v for k, v in clean.items() if v})

    @classmethod
    def zero(cls, n: int) -> Polynomial:
        return cls(n, {})

    @classmethod
    def constant(cls, value, n: int) -> Polynomial:
        return cls(n, {(0,) * n: value})

    @classmethod
    def coordinate(cls, axis: int, n: int) -> Polynomial:
        exps = [0] * n
        exps[axis] = 1
        return cls(n, {tuple(exps): 1})

    @classmethod
    def linear(cls, vec) -> Polynomial:
        """``x -> vec . x`` (entries may be complex)."""
        n = len(vec)
        return sum((cls.coordinate(a, n) * v for a, v in enumerate(vec) if v != 0), cls.zero(n))

    @classmethod
    def parse(cls, text: str, n: int) -> Polynomial:
        """Read ``"coeff * x1^a1*...*xn^an + ..."``; decimals are read exactly, ``I`` is the imaginary unit."""
        names = {f"x{a + 1}": sympy.Symbol(f"x{a + 1}") for a in range(n)}
        names["I"] = sympy.I
        expr = parse_expr(text.replace("^", "**"), local_dict=names,
                          transformations=standard_transformations + (rationalize,))
        gens = [names[f"x{a + 1}"] for a in range(n)]
        extra = expr.free_symbols - set(gens)
        if extra:
            raise ValueError(f"unknown symbols {sorted(map(str, extra))}")
        poly = sympy.Poly(sympy.expand(expr), *gens, domain=QQ_I)
        return cls(n, dict(poly.terms()))

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for exps in sorted(self.terms, reverse=True):
            mono = "*".join(f"x{a + 1}^{e}" if e > 1 else f"x{a + 1}" for a, e in enumerate(exps) if e)
            coeff = _format_coeff(self.terms[exps])
            parts.append(f"{coeff} * {mono}" if mono else coeff)
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()!r}, n={self.n})"

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, complex)) and other == 0:
            return self.is_zero()
        return isinstance(other, Polynomial) and self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def _lift(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError("polynomial dimensions differ")
            return other
        return Polynomial.constant(other, self.n)

    def __add__(self, other) -> Polynomial:
        other = self._lift(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, QQ_I.zero) + v
        return Polynomial(self.n, out)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(self.n, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other) -> Polynomial:
        return self + (-self._lift(other))

    def __rsub__(self, other) -> Polynomial:
        return self._lift(other) - self

    def __mul__(self, other) -> Polynomial:
        if not isinstance(other, Polynomial):
            c = to_coeff(other)
            return Polynomial(self.n, {k: v * c for k, v in self.terms.items()})
        self._lift(other)
        out = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                k = _add_exps(ka, kb)
                out[k] = out.get(k, QQ_I.zero) + va * vb
        return Polynomial(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Polynomial:
        out = Polynomial.constant(1, self.n)
        for _ in range(k):
            out = out * self
        return out

    def diff(self, axis: int, times: int = 1) -> Polynomial:
        out = {}
        for exps, c in self.terms.items():
            e = exps[axis]
            if e < times:
                continue
            new = list(exps)
            new[axis] = e - times
            out[tuple(new)] = c * math.perm(e, times)
        return Polynomial(self.n, out)

    def diff_multi(self, alpha) -> Polynomial:
        out = self
        for axis, k in enumerate(alpha):
            if k:
                out = out.diff(axis, k)
        return out

    def gradient(self) -> list[Polynomial]:
        return [self.diff(a) for a in range(self.n)]

    def laplacian(self) -> Polynomial:
        return sum((self.diff(a, 2) for a in range(self.n)), Polynomial.zero(self.n))

    def evaluate_exact(self, point):
        pt = [to_coeff(v) for v in point]
        total = QQ_I.zero
        for exps, c in self.terms.items():
            term = c
            for v, e in zip(pt, exps):
                term = term * v**e
            total += term
        return total

    def __call__(self, *coords) -> np.ndarray:
        """Floating evaluation; ``coords`` are arrays broadcast against each other."""
        coords = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        if len(coords) != self.n:
            raise ValueError(f"need {self.n} coordinate arrays")
        out = np.zeros(coords[0].shape, dtype=complex)
        cache = {}
        for exps, c in self.terms.items():
            term = np.full(coords[0].shape, coeff_to_complex(c))
            for a, e in enumerate(exps):
                if e:
                    key = (a, e)
                    if key not in cache:
                        cache[key] = coords[a] ** e
                    term = term * cache[key]
            out += term
        return out

    def on_grid(self, domain: GridDomain) -> TensorField:
        return TensorField(domain, 0, self(*domain.mesh()))

    def compose_linear(self, matrix) -> Polynomial:
        """``y -> p(M y)`` for a square matrix ``M`` with exact entries."""
        M = [[to_coeff(v) for v in row] for row in matrix]
        rows = [Polynomial(self.n, {tuple(int(b == a) for b in range(self.n)): M[i][a] for a in range(self.n)})
                for i in range(self.n)]
        out = Polynomial.zero(self.n)
        for exps, c in self.terms.items():
            term = Polynomial.constant(c, self.n)
            for i, e in enumerate(exps):
                if e:
                    term = term * rows[i] ** e
            out = out + term
        return out


def _zero_alpha(n):
    return (0,) * n


@dataclass(frozen=True, eq=False)
class PolyDiffOp:
    """``sum_alpha c_alpha(x) d^alpha`` with polynomial coefficients."""

    n: int
    terms: dict

    def __post_init__(self):
        clean = {}
        for alpha, c in dict(self.terms).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n:
                raise ValueError("derivative multi-index has wrong length")
            if not isinstance(c, Polynomial):
                c = Polynomial.constant(c, self.n)
            if c.n != self.n:
                raise ValueError("coefficient dimension differs")
            clean[alpha] = clean[alpha] + c if alpha in clean else c
        object.__setattr__(self, "terms", {k: v for k, v in clean.items() if not v.is_zero()})

    @classmethod
    def identity(cls, n: int) -> PolyDiffOp:
        return cls(n, {_zero_alpha(n): 1})

    @property
    def order(self) -> int:
        return max((sum(a) for a in self.terms), default=-1)

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyDiffOp) and self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __add__(self, other: PolyDiffOp) -> PolyDiffOp:
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return PolyDiffOp(self.n, out)

    def __neg__(self) -> PolyDiffOp:
        return PolyDiffOp(self.n, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: PolyDiffOp) -> PolyDiffOp:
        return self + (-other)

    def scale(self, c) -> PolyDiffOp:
        return PolyDiffOp(self.n, {k: v * c for k, v in self.terms.items()})

    def __call__(self, u: Polynomial) -> Polynomial:
        return op_apply(self, u)

    def __matmul__(self, other: PolyDiffOp) -> PolyDiffOp:
        return op_compose(self, other)

    def homogeneous_part(self, order: int) -> dict:
        return {a: c for a, c in self.terms.items() if sum(a) == order}

    def __repr__(self) -> str:
        parts = [f"[{c.to_text()}]*d{alpha}" for alpha, c in sorted(self.terms.items())]
        return f"PolyDiffOp(n={self.n}, {' + '.join(parts) or '0'})"


def op_apply(P: PolyDiffOp, u: Polynomial) -> Polynomial:
    if P.n != u.n:
        raise ValueError("operator and polynomial dimensions differ")
    out = Polynomial.zero(u.n)
    for alpha, c in P.terms.items():
        out = out + c * u.diff_multi(alpha)
    return out


def op_compose(P: PolyDiffOp, Q: PolyDiffOp, min_order: int = 0) -> PolyDiffOp:
    """``P o Q`` by the Leibniz rule, keeping terms of order ``>= min_order``."""
    if P.n != Q.n:
        raise ValueError("operator dimensions differ")
    if P.order + Q.order > MAX_ORDER:
        raise ValueError(f"composed order exceeds {MAX_ORDER}")
    out: dict = {}
    for alpha, c in P.terms.items():
        for beta, d in Q.terms.items():
            for gamma in product(*[range(a + 1) for a in alpha]):
                if sum(alpha) - sum(gamma) + sum(beta) < min_order:
                    continue
                coef = math.prod(math.comb(a, g) for a, g in zip(alpha, gamma))
                dd = d.diff_multi(gamma)
                if dd.is_zero():
                    continue
                key = tuple(a - g + b for a, g, b in zip(alpha, gamma, beta))
                term = c * dd * coef
                out[key] = out[key] + term if key in out else term
    return PolyDiffOp(P.n, out)


def multiply_op(p: Polynomial) -> PolyDiffOp:
    return PolyDiffOp(p.n, {_zero_alpha(p.n): p})


def derivative_op(alpha) -> PolyDiffOp:
    return PolyDiffOp(len(alpha), {tuple(alpha): 1})


def laplacian_op(n: int) -> PolyDiffOp:
    terms = {}
    for a in range(n):
        alpha = [0] * n
        alpha[a] = 2
        terms[tuple(alpha)] = 1
    return PolyDiffOp(n, terms)


@lru_cache(maxsize=None)
def polyharmonic_op(m: int, n: int) -> PolyDiffOp:
    """``(-Delta)^m``."""
    lap = laplacian_op(n).scale(-1)
    out = PolyDiffOp.identity(n)
    for _ in range(m):
        out = op_compose(lap, out)
    return out


def conjugate_exp(P: PolyDiffOp, phi: Polynomial, min_order: int = 0) -> PolyDiffOp:
    """``e^{-phi} P e^{phi}``: every ``d_j`` becomes ``d_j + (d_j phi)``.

    With ``min_order`` only terms of at least that order are formed.  A
    partial product of ``k`` shifted derivatives whose order is below
    ``k - (P.order - min_order)`` cannot contribute to them and is dropped.
    """
    if P.n != phi.n:
        raise ValueError("operator and phase dimensions differ")
    n = P.n
    slack = max(P.order - min_order, 0) if min_order > 0 else None

    def floor(k):
        return 0 if slack is None else max(k - slack, 0)

    shifted = []
    for a in range(n):
        alpha = [0] * n
        alpha[a] = 1
        shifted.append(derivative_op(alpha) + multiply_op(phi.diff(a)))
    powers = [[PolyDiffOp.identity(n)] for _ in range(n)]
    out = PolyDiffOp(n, {})
    for alpha, c in P.terms.items():
        term = multiply_op(c)
        done = 0
        for a, k in enumerate(alpha):
            while len(powers[a]) <= k:
                j = len(powers[a])
                powers[a].append(op_compose(shifted[a], powers[a][-1], floor(j)))
            done += k
            term = op_compose(term, powers[a][k], floor(done))
        out = out + term
    return out


def commutator(P: PolyDiffOp, phi: Polynomial) -> PolyDiffOp:
    """``[P, phi] = P o phi - phi o P``: the part of ``e^{-t phi} P e^{t phi}`` linear in ``t``."""
    mult = multiply_op(phi)
    return op_compose(P, mult) - op_compose(mult, P)


def _alpha_to_index(alpha) -> tuple:
    return tuple(a for a, k in enumerate(alpha) for _ in range(k))


def extract_coeff_exact(P: PolyDiffOp, order: int) -> dict:
    """Order-``l`` coefficient tensor as ``{nondecreasing index: Polynomial}``.

    ``sum_J mult(J) a_J d^J`` reproduces the order-``l`` part of ``P``, so
    ``a_J = c_alpha / mult(J)``.
    """
    out = {}
    for J in tc.sym_indices(P.n, order):
        out[J] = Polynomial.zero(P.n)
    for alpha, c in P.homogeneous_part(order).items():
        J = _alpha_to_index(alpha)
        out[J] = c * to_coeff(Fraction(1, tc.multiplicity(J)))
    return out


def extract_coeff_tensor(P: PolyDiffOp, order: int, x) -> tc.SymTensor:
    exact = extract_coeff_exact(P, order)
    comps = [exact[J](*[np.asarray(v) for v in x]) for J in tc.sym_indices(P.n, order)]
    return tc.SymTensor(P.n, order, np.array(comps, dtype=complex).reshape(-1))


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def _delta_power_component(index) -> Fraction:
    # symmetrized delta^{(x)k}: number of equal-value perfect matchings over all matchings
    counts = [index.count(v) for v in set(index)]
    if any(c % 2 for c in counts):
        return Fraction(0)
    good = math.prod(_double_factorial(c - 1) for c in counts)
    return Fraction(good, _double_factorial(len(index) - 1))


def exact_sym_with_delta(vec, k: int) -> dict:
    """Exact ``i_delta^k(v)`` for a vector of Polynomials, as ``{index: Polynomial}``."""
    n = len(vec)
    rank = 2 * k + 1
    out = {}
    for J in tc.sym_indices(n, rank):
        acc = Polynomial.zero(n)
        for pos in range(rank):
            rest = J[:pos] + J[pos + 1:]
            w = _delta_power_component(rest)
            if w:
                acc = acc + vec[J[pos]] * to_coeff(w / rank)
        out[J] = acc
    return out


def gauge_top_coefficient(phi: Polynomial, m: int) -> dict:
    """``(-1)^m 2m i_delta^{m-1}(grad phi)`` exactly."""
    base = exact_sym_with_delta(phi.gradient(), m - 1)
    factor = (-1) ** m * 2 * m
    return {J: p * factor for J, p in base.items()}


# transport and CGO amplitudes

def complete_frame(eta) -> np.ndarray:
    """Orthonormal frame with rows ``e_1, eta, b_3, ..`` (Gram-Schmidt on the standard basis)."""
    eta = np.asarray(eta, dtype=float)
    n = len(eta)
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
    return np.array(basis[:n])


@dataclass(frozen=True)
class CgoParams:
    h: float
    eta: tuple
    frame: np.ndarray | None = None

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if self.h <= 0:
            raise ValueError("h must be positive")
        if abs(np.linalg.norm(eta) - 1) > 1e-12 or abs(eta[0]) > 1e-12:
            raise ValueError("eta must be a unit vector orthogonal to e_1")
        frame = complete_frame(eta) if self.frame is None else np.asarray(self.frame, dtype=float)
        if frame.shape != (len(eta), len(eta)) or not np.allclose(frame @ frame.T, np.eye(len(eta)), atol=1e-12):
            raise ValueError("frame must be orthonormal")
        if not (np.allclose(frame[0], np.eye(len(eta))[0], atol=1e-12) and np.allclose(frame[1], eta, atol=1e-12)):
            raise ValueError("frame must start with e_1 and eta")
        object.__setattr__(self, "eta", tuple(eta))
        object.__setattr__(self, "frame", frame)

    @property
    def n(self) -> int:
        return len(self.eta)

    @property
    def zeta(self) -> np.ndarray:
        z = 1j * np.asarray(self.eta)
        z[0] += 1
        return z

    def frame_coordinates(self, x: np.ndarray) -> np.ndarray:
        """``y_j = x . frame_j`` for points stacked along the last axis."""
        return np.asarray(x) @ self.frame.T


def transport_apply(a: Polynomial, power: int = 1) -> Polynomial:
    """``T^p a`` with ``T = 2(d/dy_1 + i d/dy_2)`` for ``a`` written in frame coordinates."""
    if a.n < 2:
        raise ValueError("transport needs at least two frame coordinates")
    for _ in range(power):
        a = (a.diff(0) + a.diff(1) * QQ_I(0, 1)) * 2
    return a


def dzbar_apply(a: Polynomial, power: int = 1) -> Polynomial:
    """``d/dzbar = (d/dy_1 + i d/dy_2) / 2`` applied ``power`` times."""
    for _ in range(power):
        a = (a.diff(0) + a.diff(1) * QQ_I(0, 1)) * QQ_I(QQ(1, 2), 0)
    return a


def z_poly(n: int, conj: bool = False) -> Polynomial:
    """``z = y_1 + i y_2`` (or its conjugate) as a polynomial in ``n`` frame coordinates."""
    return Polynomial.linear([1, -1j if conj else 1j] + [0] * (n - 2))


def cgo_pair(params: CgoParams, a0: Polynomial, b0: Polynomial, domain: GridDomain,
             m: int | None = None) -> tuple[TensorField, TensorField]:
    """``u = exp(zeta.x/h) a0(y)``, ``v = exp(-zeta.x/h) b0(y)`` sampled on the grid.

    With ``m`` given, the amplitudes are checked to satisfy ``T^m a = 0``.
    """
    if m is not None:
        for name, amp in (("a0", a0), ("b0", b0)):
            if not transport_apply(amp, m).is_zero():
                raise ValueError(f"{name} is not annihilated by T^{m}")
    pts = domain.points()
    y = params.frame_coordinates(pts)
    phase = np.exp(pts @ params.zeta / params.h)
    ycoords = [y[..., a] for a in range(domain.n)]
    u = TensorField(domain, 0, phase * a0(*ycoords))
    v = TensorField(domain, 0, b0(*ycoords) / phase)
    return u, v
