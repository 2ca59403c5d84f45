import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symtomo import tensor_core as tc
from symtomo.fields import GridDomain
from symtomo.symbolic import (CgoParams, Polynomial, cgo_pair, commutator, complete_frame,
                              conjugate_exp, derivative_op, dzbar_apply, exact_sym_with_delta,
                              extract_coeff_exact, extract_coeff_tensor, gauge_top_coefficient, laplacian_op,
                              multiply_op, op_compose, polyharmonic_op, transport_apply, z_poly)

small = st.integers(-4, 4)


def P2(text):
    return Polynomial.parse(text, 2)


def test_parse_round_trip_and_exact_rationals():
    p = Polynomial.parse("3/7*x1^2*x2 - (1/2 + 2*I)*x3 + 5", 3)
    assert Polynomial.parse(p.to_text(), 3) == p
    assert p.degree == 3
    assert p.evaluate_exact((1, 1, 0)) == Polynomial.constant(5, 3).evaluate_exact((0, 0, 0)) + \
        Polynomial.parse("3/7", 3).evaluate_exact((0, 0, 0))
    assert Polynomial.parse("0.25*x1", 1) == Polynomial.parse("x1/4", 1)
    with pytest.raises(Exception):
        Polynomial.parse("sin(x1)", 1)


def test_arithmetic_and_calculus():
    p = P2("x1^2*x2 + 3*x2")
    assert p.diff(0) == P2("2*x1*x2")
    assert p.diff_multi((1, 1)) == P2("2*x1")
    assert p.laplacian() == P2("2*x2")
    assert (p * p - p**2).is_zero()
    assert np.isclose(p(2.0, 1.0), 7.0)


def test_operator_application():
    assert laplacian_op(2)(P2("x1^2 + x2^2")) == Polynomial.constant(4, 2)
    assert polyharmonic_op(2, 2)(P2("x1^4")) == Polynomial.constant(24, 2)
    assert polyharmonic_op(1, 2)(P2("x1^2")) == Polynomial.constant(-2, 2)


def test_leibniz_composition():
    x1 = Polynomial.coordinate(0, 2)
    comp = op_compose(derivative_op((1, 0)), multiply_op(x1))
    assert comp == derivative_op((1, 0)).__class__(2, {(1, 0): x1, (0, 0): 1})
    u = P2("x1^3*x2 + x2^2")
    assert comp(u) == derivative_op((1, 0))(x1 * u)


@settings(max_examples=20, deadline=None)
@given(a=small, b=small, c=small)
def test_conjugation_is_exact_shift(a, b, c):
    phi = Polynomial.linear([a, b])
    P = laplacian_op(2)
    u = P2("x1^2*x2") + c
    # e^{-phi} Delta (e^{phi} u) = Delta u + 2 grad phi . grad u + |grad phi|^2 u for linear phi
    expected = P(u) + (u.diff(0) * (2 * a) + u.diff(1) * (2 * b)) + u * (a * a + b * b)
    assert conjugate_exp(P, phi)(u) == expected


def test_truncated_conjugation_keeps_top_orders():
    phi = P2("(x1 + x2^2)*(1 - x1^2)^2")
    P = polyharmonic_op(2, 2)
    full, trunc = conjugate_exp(P, phi), conjugate_exp(P, phi, 3)
    for order in (3, 4):
        assert full.homogeneous_part(order) == trunc.homogeneous_part(order)
    assert min(sum(a) for a in trunc.terms) >= 3


def test_commutator_matches_linear_part():
    phi = P2("x1*x2^2 + x2")
    P = polyharmonic_op(2, 2)
    u = P2("x1^3 + x2^4*x1")
    assert commutator(P, phi)(u) == P(phi * u) - phi * P(u)


@pytest.mark.parametrize("m", [2, 3])
@pytest.mark.parametrize("core", ["1 + x1/2 - x2^2/3", "x1*x2 + 2", "3 - x1^3 + x2"])
def test_gauge_top_coefficient_exact(m, core):
    phi = P2(core) * P2("(1 - x1^2)*(1 - x2^2)") ** 2
    full = conjugate_exp(polyharmonic_op(m, 2), phi, 2 * m - 1)
    got = extract_coeff_exact(full, 2 * m - 1)
    want = gauge_top_coefficient(phi, m)
    assert all(got[J] == want[J] for J in got)
    assert not (full - polyharmonic_op(m, 2)).homogeneous_part(2 * m)


def test_gauge_top_coefficient_m2_literal():
    # order-3 coefficient of the conjugated biharmonic operator is 4 i_delta(grad phi)
    phi = P2("x1^2*x2 + x2^3")
    full = conjugate_exp(polyharmonic_op(2, 2), phi)
    sym = exact_sym_with_delta(phi.gradient(), 1)
    got = extract_coeff_exact(full, 3)
    assert all(got[J] == sym[J] * 4 for J in got)
    pt = (0.3, -0.7)
    grad = np.array([complex(g(*pt)) for g in phi.gradient()])
    assert np.allclose(extract_coeff_tensor(full, 3, pt).comps, 4 * tc.i_delta(tc.SymTensor.vector(grad)).comps)


def test_exact_sym_with_delta_matches_float():
    vec = [Polynomial.constant(2, 3), Polynomial.constant(-1, 3), Polynomial.constant(5, 3)]
    exact = exact_sym_with_delta(vec, 2)
    t = tc.SymTensor.vector([2.0, -1.0, 5.0])
    for _ in range(2):
        t = tc.i_delta(t)
    assert np.allclose([complex(exact[J](0, 0, 0)) for J in tc.sym_indices(3, 5)], t.comps)


@settings(max_examples=50, deadline=None)
@given(m=st.integers(1, 4), data=st.data())
def test_poly_analytic_transport(m, data):
    k = data.draw(st.integers(0, m - 1))
    n = data.draw(st.integers(2, 4))
    z, zb = z_poly(n), z_poly(n, conj=True)
    coeffs = data.draw(st.lists(small, min_size=1, max_size=4))
    f = sum((z**j * c for j, c in enumerate(coeffs)), Polynomial.zero(n))
    g = Polynomial.constant(1, n)
    for a in range(2, n):
        g = g * (Polynomial.coordinate(a, n) + data.draw(small))
    y2 = Polynomial.coordinate(1, n)
    assert transport_apply(y2**k * f * g, m).is_zero()
    assert dzbar_apply((z - zb) ** k * f, m).is_zero()
    if any(coeffs):
        assert not dzbar_apply((z - zb) ** m * f, m).is_zero()


def test_complete_frame_and_cgo_params():
    F = complete_frame([0, 0.6, 0.8])
    assert np.allclose(F @ F.T, np.eye(3)) and np.allclose(F[1], [0, 0.6, 0.8])
    p = CgoParams(0.5, (0, 0.6, 0.8))
    assert np.isclose(p.zeta @ p.zeta, 0)
    with pytest.raises(ValueError):
        CgoParams(0.5, (0.6, 0.8, 0))
    with pytest.raises(ValueError):
        CgoParams(-1, (0, 1, 0))


def test_cgo_pair_product_is_amplitude_product():
    d = GridDomain.box(2, 9)
    p = CgoParams(0.25, (0, 1))
    a0, b0 = Polynomial.parse("x2", 2), Polynomial.constant(1, 2)
    u, v = cgo_pair(p, a0, b0, d, m=2)
    assert np.allclose(u.values * v.values, d.mesh()[1][..., None])
    with pytest.raises(ValueError):
        cgo_pair(p, Polynomial.parse("x2^2", 2), b0, d, m=2)


def test_composed_order_guard():
    with pytest.raises(ValueError):
        op_compose(polyharmonic_op(5, 1), polyharmonic_op(5, 1))
