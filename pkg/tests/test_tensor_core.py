import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symtomo import tensor_core as tc

dims = st.integers(1, 4)
ranks = st.integers(0, 4)
seeds = st.integers(0, 2**32 - 1)


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def full_inner(f, g):
    return np.sum(f.to_full() * np.conj(g.to_full()))


def test_component_counts():
    for n, m in itertools.product(range(1, 5), range(6)):
        assert tc.num_components(n, m) == math.comb(n + m - 1, m) == len(tc.sym_indices(n, m))
        assert sum(tc.multiplicities(n, m)) == n**m


def test_index_positions_round_trip():
    for J in tc.sym_indices(3, 3):
        assert tc.sym_indices(3, 3)[tc.index_position(J, 3)] == J


def test_i_delta_examples():
    assert tc.i_delta(tc.SymTensor.scalar(2.0, 3)).allclose(tc.SymTensor.delta(3) * 2)
    out = tc.i_delta(tc.SymTensor.vector([1.0, 0.0]))
    vals = dict(zip(tc.sym_indices(2, 3), out.comps))
    assert np.isclose(vals[(0, 0, 0)], 1) and np.isclose(vals[(0, 1, 1)], 1 / 3)
    assert np.isclose(vals[(0, 0, 1)], 0) and np.isclose(vals[(1, 1, 1)], 0)


def test_j_delta_examples():
    assert np.isclose(tc.j_delta(tc.SymTensor.delta(4)).comps[0], 4)
    f = tc.SymTensor.from_dict(2, 2, {(0, 0): 1, (0, 1): 2, (1, 1): 3})
    assert np.isclose(tc.j_delta(f).comps[0], 4)
    assert tc.j_delta(tc.SymTensor.vector([1.0, 2.0])).m == 0


def test_i_vec_examples():
    e1, e2 = np.eye(2)
    assert np.allclose(tc.i_vec(tc.SymTensor.scalar(1.0, 2), e1).comps, [1, 0])
    assert np.allclose(tc.i_vec(tc.SymTensor.vector(e1), e2).comps, [0, 0.5, 0])


def test_j_vec_examples(rng):
    x = rng.standard_normal(3)
    assert np.allclose(tc.j_vec(tc.SymTensor.delta(3), x).comps, x)
    xm = tc.i_vec_power(tc.SymTensor.scalar(1.0, 3), x, 3)
    assert tc.j_vec(xm, x).allclose(tc.i_vec_power(tc.SymTensor.scalar(1.0, 3), x, 2) * float(x @ x))
    with pytest.raises(ValueError):
        tc.j_vec(tc.SymTensor.scalar(1.0, 3), x)


def test_symmetrize_matches_full_expansion(rng):
    t = rng.standard_normal((3, 3, 3))
    sym = tc.symmetrize(t, 3, 3)
    full = sum(np.transpose(t, p) for p in itertools.permutations(range(3))) / 6
    assert np.allclose(sym.to_full(), full)


@settings(max_examples=60, deadline=None)
@given(n=dims, m=ranks, seed=seeds)
def test_delta_adjointness(n, m, seed):
    rng = np.random.default_rng(seed)
    f, g = tc.SymTensor.random(n, m, rng), tc.SymTensor.random(n, m + 2, rng)
    assert rel(tc.inner(tc.i_delta(f), g), tc.inner(f, tc.j_delta(g))) < 1e-12


@settings(max_examples=60, deadline=None)
@given(n=dims, m=ranks, seed=seeds)
def test_vector_adjointness(n, m, seed):
    rng = np.random.default_rng(seed)
    f, g = tc.SymTensor.random(n, m, rng), tc.SymTensor.random(n, m + 1, rng)
    x = rng.standard_normal(n)
    assert rel(tc.inner(tc.i_vec(f, x), g), tc.inner(f, tc.j_vec(g, x))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 3), m=st.integers(0, 3), seed=seeds)
def test_weighted_inner_matches_full_tensor(n, m, seed):
    rng = np.random.default_rng(seed)
    f, g = tc.SymTensor.random(n, m, rng), tc.SymTensor.random(n, m, rng)
    assert rel(tc.inner(f, g), full_inner(f, g)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 4), m=st.integers(0, 4), seed=seeds)
def test_trace_free_decomposition(n, m, seed):
    rng = np.random.default_rng(seed)
    f = tc.SymTensor.random(n, m, rng)
    parts = tc.trace_free_decompose(f)
    summands = []
    for k, b in enumerate(parts):
        if b.m >= 2:
            assert tc.j_delta(b).norm() <= 1e-10 * max(f.norm(), 1)
        s = b
        for _ in range(k):
            s = tc.i_delta(s)
        summands.append(s)
    total = summands[0]
    for s in summands[1:]:
        total = total + s
    assert (total - f).norm() <= 1e-10 * f.norm()
    for a, b in itertools.combinations(summands, 2):
        assert abs(tc.inner(a, b)) <= 1e-10 * max(f.norm() ** 2, 1e-300)


def test_trace_free_decomposition_example():
    parts = tc.trace_free_decompose(tc.SymTensor.from_dict(2, 2, {(0, 0): 2.0}))
    assert np.allclose(parts[0].comps, [1, 0, -1]) and np.allclose(parts[1].comps, [1])


def test_decomposition_uniqueness(rng):
    w = tc.projection_p(tc.SymTensor.random(3, 2, rng))
    parts = tc.trace_free_decompose(tc.i_delta(w))
    assert parts[0].norm() < 1e-12 and (parts[1] - w).norm() < 1e-12


@pytest.mark.parametrize("n,m", [(n, m) for n in range(1, 5) for m in range(0, 5)])
def test_projection_matrix_identities(n, m):
    P = tc.projection_matrix(n, m)
    W = np.diag(tc.multiplicities(n, m))
    assert np.abs(P @ P - P).max() < 1e-12
    assert np.abs(W @ P - (W @ P).T.conj()).max() < 1e-12
    if m >= 2:
        assert np.abs(P @ tc.i_delta_matrix(n, m - 2)).max() < 1e-12
        assert np.abs(tc.j_delta_matrix(n, m) @ P).max() < 1e-12
    else:
        assert np.allclose(P, np.eye(len(P)))


def test_projection_least_squares_oracle(rng):
    n, m = 3, 3
    f = tc.SymTensor.random(n, m, rng)
    w = np.sqrt(tc.multiplicities(n, m))
    A = tc.i_delta_matrix(n, m - 2)
    coef, *_ = np.linalg.lstsq(w[:, None] * A, w * f.comps, rcond=None)
    assert np.allclose(tc.projection_p(f).comps, f.comps - A @ coef, atol=1e-12)
    assert tc.projection_p(tc.SymTensor.delta(n)).norm() < 1e-14


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 4), m=st.integers(0, 4), seed=seeds)
def test_contraction_identity(n, m, seed):
    rng = np.random.default_rng(seed)
    f = tc.SymTensor.random(n, m, rng)
    xi = rng.standard_normal(n)
    lhs = tc.j_vec(tc.i_vec(f, xi), xi)
    rhs = f * (float(xi @ xi) / (m + 1))
    if m >= 1:
        rhs = rhs + tc.i_vec(tc.j_vec(f, xi), xi) * (m / (m + 1))
    assert (lhs - rhs).norm() <= 1e-10 * rhs.norm()


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 4), m=st.integers(1, 4), seed=seeds)
def test_trace_free_contraction_identity(n, m, seed):
    rng = np.random.default_rng(seed)
    f = tc.projection_p(tc.SymTensor.random(n, m, rng))
    xi = rng.standard_normal(n)
    g = tc.j_vec(f, xi)
    lhs = tc.jdelta_idelta_solve(g)
    assert (lhs - g * (m * (m + 1) / (2 * (n + 2 * m - 2)))).norm() <= 1e-10 * g.norm()


def test_jdelta_idelta_round_trip(rng):
    g = tc.SymTensor.random(3, 2, rng)
    assert (tc.j_delta(tc.i_delta(tc.jdelta_idelta_solve(g))) - g).norm() < 1e-12
    assert np.isclose(tc.jdelta_idelta_solve(tc.SymTensor.scalar(6.0, 3)).comps[0], 2.0)


def test_dimension_mismatch_raises(rng):
    with pytest.raises(ValueError):
        tc.i_vec(tc.SymTensor.random(2, 1, rng), np.ones(3))
