"""Pointwise algebra of symmetric tensors in compressed storage.

A symmetric rank-``m`` tensor in ``R^n`` is stored by its components on the
nondecreasing multi-indices, listed in lexicographic order.  There are
``C(n+m-1, m)`` of them.  Every linear operator in this module is a small
dense matrix acting on that component vector; the matrices are cached per
``(n, m)`` so the same objects can be applied to a single tensor or to a
whole grid of them (last axis = components).

Axis labels are 0-based internally.  Files and printed output use 1-based
labels; :func:`axis_label` and :func:`parse_axis_label` own that mapping.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SymTensor",
    "MixedTensor",
    "axis_label",
    "parse_axis_label",
    "sym_indices",
    "index_position",
    "multiplicity",
    "multiplicities",
    "num_components",
    "symmetrize",
    "i_delta",
    "j_delta",
    "i_vec",
    "j_vec",
    "i_vec_power",
    "j_vec_power",
    "inner",
    "trace_free_decompose",
    "projection_p",
    "jdelta_idelta_solve",
    "i_delta_matrix",
    "j_delta_matrix",
    "i_vec_matrix",
    "j_vec_matrix",
    "projection_matrix",
    "jdelta_idelta_matrix",
]

MAX_DIM = 6
MAX_RANK = 10


def axis_label(axis: int) -> str:
    """0-based internal axis -> 1-based label used in files and reports."""
    return str(axis + 1)


def parse_axis_label(label: str | int) -> int:
    axis = int(label) - 1
    if axis < 0:
        raise ValueError(f"axis labels are 1-based, got {label!r}")
    return axis


def _check_dims(n: int, m: int) -> None:
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"dimension must lie in 1..{MAX_DIM}, got {n}")
    if not 0 <= m <= MAX_RANK:
        raise ValueError(f"rank must lie in 0..{MAX_RANK}, got {m}")


@lru_cache(maxsize=None)
def sym_indices(n: int, m: int) -> tuple[tuple[int, ...], ...]:
    """Nondecreasing multi-indices of length ``m`` over ``range(n)``, lex order."""
    _check_dims(n, m)
    return tuple(itertools.combinations_with_replacement(range(n), m))


@lru_cache(maxsize=None)
def _position_table(n: int, m: int) -> dict[tuple[int, ...], int]:
    return {idx: pos for pos, idx in enumerate(sym_indices(n, m))}


def index_position(idx, n: int) -> int:
    """Lexicographic position of a multi-index (any order of entries)."""
    key = tuple(sorted(idx))
    return _position_table(n, len(key))[key]


def num_components(n: int, m: int) -> int:
    return math.comb(n + m - 1, m)


def multiplicity(idx) -> int:
    """Number of distinct permutations of ``idx``."""
    out = math.factorial(len(idx))
    for c in Counter(idx).values():
        out //= math.factorial(c)
    return out


@lru_cache(maxsize=None)
def multiplicities(n: int, m: int) -> np.ndarray:
    w = np.array([multiplicity(idx) for idx in sym_indices(n, m)], dtype=float)
    w.setflags(write=False)
    return w


def _as_components(values, n: int, m: int) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (num_components(n, m),):
        raise ValueError(
            f"rank-{m} tensor in R^{n} needs {num_components(n, m)} components, got shape {arr.shape}"
        )
    return arr


@dataclass(frozen=True, eq=False)
class SymTensor:
    """Symmetric tensor with compressed, lexicographically ordered components."""

    n: int
    m: int
    comps: np.ndarray

    def __post_init__(self):
        _check_dims(self.n, self.m)
        arr = _as_components(self.comps, self.n, self.m).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "comps", arr)

    @classmethod
    def zeros(cls, n: int, m: int) -> SymTensor:
        return cls(n, m, np.zeros(num_components(n, m), dtype=complex))

    @classmethod
    def scalar(cls, value, n: int) -> SymTensor:
        return cls(n, 0, np.array([value], dtype=complex))

    @classmethod
    def vector(cls, x) -> SymTensor:
        x = np.asarray(x, dtype=complex)
        return cls(len(x), 1, x)

    @classmethod
    def delta(cls, n: int) -> SymTensor:
        return i_delta(cls.scalar(1.0, n))

    @classmethod
    def from_dict(cls, n: int, m: int, entries: dict) -> SymTensor:
        comps = np.zeros(num_components(n, m), dtype=complex)
        for idx, val in entries.items():
            comps[index_position(idx, n)] = val
        return cls(n, m, comps)

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator, complex_values=True) -> SymTensor:
        size = num_components(n, m)
        comps = rng.standard_normal(size)
        if complex_values:
            comps = comps + 1j * rng.standard_normal(size)
        return cls(n, m, comps)

    def __getitem__(self, idx) -> complex:
        if isinstance(idx, int):
            idx = (idx,)
        return self.comps[index_position(idx, self.n)]

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.m

    def to_full(self) -> np.ndarray:
        """Expand to the full ``n**m`` array."""
        full = np.empty(self.shape, dtype=complex)
        if self.m == 0:
            return np.asarray(self.comps[0])
        for idx in itertools.product(range(self.n), repeat=self.m):
            full[idx] = self.comps[index_position(idx, self.n)]
        return full

    def norm(self) -> float:
        return math.sqrt(max(inner(self, self).real, 0.0))

    def _check_same(self, other: SymTensor) -> None:
        if not isinstance(other, SymTensor) or (other.n, other.m) != (self.n, self.m):
            raise ValueError("tensors must share dimension and rank")

    def __add__(self, other: SymTensor) -> SymTensor:
        self._check_same(other)
        return SymTensor(self.n, self.m, self.comps + other.comps)

    def __sub__(self, other: SymTensor) -> SymTensor:
        self._check_same(other)
        return SymTensor(self.n, self.m, self.comps - other.comps)

    def __neg__(self) -> SymTensor:
        return SymTensor(self.n, self.m, -self.comps)

    def __mul__(self, c) -> SymTensor:
        return SymTensor(self.n, self.m, self.comps * c)

    __rmul__ = __mul__

    def __truediv__(self, c) -> SymTensor:
        return SymTensor(self.n, self.m, self.comps / c)

    def allclose(self, other: SymTensor, atol=1e-12, rtol=0.0) -> bool:
        self._check_same(other)
        return bool(np.allclose(self.comps, other.comps, atol=atol, rtol=rtol))

    def __repr__(self) -> str:
        return f"SymTensor(n={self.n}, m={self.m}, comps={np.round(self.comps, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class MixedTensor:
    """Direct sum ``f(0) + f(1) + ... + f(m)`` of symmetric tensors of ranks 0..m."""

    parts: tuple[SymTensor, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("a mixed tensor needs at least the rank-0 part")
        n = parts[0].n
        for p, part in enumerate(parts):
            if part.m != p or part.n != n:
                raise ValueError(f"part {p} must have rank {p} and dimension {n}")
        object.__setattr__(self, "parts", parts)

    @property
    def n(self) -> int:
        return self.parts[0].n

    @property
    def max_rank(self) -> int:
        return len(self.parts) - 1

    def contract(self, xi) -> complex:
        """``sum_p f(p)_{i1..ip} xi^i1 .. xi^ip`` (no conjugation)."""
        return sum(_pair(part, i_vec_power(SymTensor.scalar(1.0, self.n), xi, part.m)) for part in self.parts)

    def norm(self) -> float:
        return math.sqrt(sum(part.norm() ** 2 for part in self.parts))


# ---------------------------------------------------------------------------
# operator matrices in compressed coordinates


@lru_cache(maxsize=None)
def i_delta_matrix(n: int, m: int) -> np.ndarray:
    """Matrix of ``i_delta: S^m -> S^{m+2}``."""
    rows = sym_indices(n, m + 2)
    mat = np.zeros((len(rows), num_components(n, m)))
    npairs = (m + 2) * (m + 1)
    for r, idx in enumerate(rows):
        for a, b in itertools.permutations(range(m + 2), 2):
            if idx[a] != idx[b]:
                continue
            rest = tuple(v for k, v in enumerate(idx) if k not in (a, b))
            mat[r, index_position(rest, n)] += 1.0 / npairs
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=None)
def j_delta_matrix(n: int, m: int) -> np.ndarray:
    """Matrix of ``j_delta: S^m -> S^{m-2}``; zero map onto rank 0 for m < 2."""
    if m < 2:
        mat = np.zeros((1, num_components(n, m)))
        mat.setflags(write=False)
        return mat
    rows = sym_indices(n, m - 2)
    mat = np.zeros((len(rows), num_components(n, m)))
    for r, idx in enumerate(rows):
        for k in range(n):
            mat[r, index_position(idx + (k, k), n)] += 1.0
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=None)
def _i_axis_matrix(n: int, m: int, axis: int) -> np.ndarray:
    # i_{e_axis}: S^m -> S^{m+1}
    rows = sym_indices(n, m + 1)
    mat = np.zeros((len(rows), num_components(n, m)))
    for r, idx in enumerate(rows):
        for k, v in enumerate(idx):
            if v == axis:
                rest = idx[:k] + idx[k + 1:]
                mat[r, index_position(rest, n)] += 1.0 / (m + 1)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=None)
def _j_axis_matrix(n: int, m: int, axis: int) -> np.ndarray:
    # j_{e_axis}: S^m -> S^{m-1}
    rows = sym_indices(n, m - 1)
    mat = np.zeros((len(rows), num_components(n, m)))
    for r, idx in enumerate(rows):
        mat[r, index_position(idx + (axis,), n)] = 1.0
    mat.setflags(write=False)
    return mat


def i_vec_matrix(n: int, m: int, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (n,):
        raise ValueError(f"vector must have {n} entries, got shape {x.shape}")
    return sum(x[a] * _i_axis_matrix(n, m, a) for a in range(n))


def j_vec_matrix(n: int, m: int, x) -> np.ndarray:
    if m < 1:
        raise ValueError("j_vec needs rank >= 1")
    x = np.asarray(x)
    if x.shape != (n,):
        raise ValueError(f"vector must have {n} entries, got shape {x.shape}")
    return sum(x[a] * _j_axis_matrix(n, m, a) for a in range(n))


@lru_cache(maxsize=None)
def jdelta_idelta_matrix(n: int, m: int) -> np.ndarray:
    mat = j_delta_matrix(n, m + 2) @ i_delta_matrix(n, m)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=None)
def projection_matrix(n: int, m: int) -> np.ndarray:
    """Matrix of ``p = Id - i_delta (j_delta i_delta)^{-1} j_delta`` on S^m."""
    eye = np.eye(num_components(n, m))
    if m < 2:
        eye.setflags(write=False)
        return eye
    solve = np.linalg.solve(jdelta_idelta_matrix(n, m - 2), j_delta_matrix(n, m))
    mat = eye - i_delta_matrix(n, m - 2) @ solve
    mat.setflags(write=False)
    return mat


# ---------------------------------------------------------------------------
# operations on SymTensor values


def symmetrize(raw, n: int, m: int) -> SymTensor:
    raw = np.asarray(raw, dtype=complex)
    if raw.shape != (n,) * m:
        raise ValueError(f"expected a full array of shape {(n,) * m}, got {raw.shape}")
    if m == 0:
        return SymTensor(n, 0, raw.reshape(1))
    comps = np.empty(num_components(n, m), dtype=complex)
    for pos, idx in enumerate(sym_indices(n, m)):
        perms = set(itertools.permutations(idx))
        comps[pos] = sum(raw[p] for p in perms) / len(perms)
    return SymTensor(n, m, comps)


def i_delta(f: SymTensor) -> SymTensor:
    return SymTensor(f.n, f.m + 2, i_delta_matrix(f.n, f.m) @ f.comps)


def j_delta(f: SymTensor) -> SymTensor:
    return SymTensor(f.n, max(f.m - 2, 0), j_delta_matrix(f.n, f.m) @ f.comps)


def i_vec(f: SymTensor, x) -> SymTensor:
    return SymTensor(f.n, f.m + 1, i_vec_matrix(f.n, f.m, x) @ f.comps)


def j_vec(f: SymTensor, x) -> SymTensor:
    return SymTensor(f.n, f.m - 1, j_vec_matrix(f.n, f.m, x) @ f.comps)


def i_vec_power(f: SymTensor, x, k: int) -> SymTensor:
    for _ in range(k):
        f = i_vec(f, x)
    return f


def j_vec_power(f: SymTensor, x, k: int) -> SymTensor:
    for _ in range(k):
        f = j_vec(f, x)
    return f


def _pair(f: SymTensor, g: SymTensor) -> complex:
    # bilinear pairing, no conjugation
    return complex(np.sum(multiplicities(f.n, f.m) * f.comps * g.comps))


def inner(f: SymTensor, g: SymTensor) -> complex:
    """Multiplicity-weighted pairing, equal to the full-tensor Frobenius product."""
    if (f.n, f.m) != (g.n, g.m):
        raise ValueError("inner product needs equal dimension and rank")
    return complex(np.sum(multiplicities(f.n, f.m) * f.comps * np.conj(g.comps)))


def jdelta_idelta_solve(g: SymTensor) -> SymTensor:
    """Solve ``j_delta(i_delta(u)) = g`` for ``u`` of the same rank as ``g``."""
    mat = jdelta_idelta_matrix(g.n, g.m)
    try:
        sol = np.linalg.solve(mat, g.comps)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - invertible by construction
        raise RuntimeError(f"j_delta i_delta singular for n={g.n}, m={g.m}") from exc
    return SymTensor(g.n, g.m, sol)


def projection_p(f: SymTensor) -> SymTensor:
    return SymTensor(f.n, f.m, projection_matrix(f.n, f.m) @ f.comps)


def trace_free_decompose(f: SymTensor) -> list[SymTensor]:
    """Parts ``b[k]`` (rank ``m-2k``, trace free) with ``f = sum_k i_delta^k b[k]``."""
    if f.m < 2:
        return [f]
    top = projection_p(f)
    rest = jdelta_idelta_solve(j_delta(f))
    return [top] + trace_free_decompose(rest)
