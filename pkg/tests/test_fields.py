import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symtomo import tensor_core as tc
from symtomo.fields import (GridDomain, TensorField, apply_coeff_op, boundary_jets_vanish, divergence,
                            inner_integral, integrate, iterated, laplacian, partial, sym_derivative)


def test_box_domain():
    d = GridDomain.box(2, 5)
    assert d.shape == (5, 5) and np.allclose(d.spacing, 0.5) and np.allclose(d.upper, 1)
    assert d.points().shape == (5, 5, 2)
    assert d.interior_mask(2).sum() == 1


@pytest.mark.parametrize("rule,degree", [("trapezoid", 1), ("simpson", 3), ("romberg", 9)])
def test_quadrature_rules_exact_on_polynomials(rule, degree):
    d = GridDomain.box(1, 17)
    (x,) = d.mesh()
    w = d.quadrature_weights(rule)
    exact = 2.0 ** (degree + 1) / (degree + 1)
    assert abs(np.sum(w * (x + 1) ** degree) - exact) < 1e-11 * exact
    assert abs(np.sum(w * (x + 1) ** (degree + 1)) - 2.0 ** (degree + 2) / (degree + 2)) > 1e-9


def test_default_integrate_is_trapezoid():
    d = GridDomain.box(2, 9)
    x, y = d.mesh()
    assert np.isclose(integrate(x + 2 * y + 1, d), 4.0)


def test_quadrature_rule_validation():
    with pytest.raises(ValueError):
        GridDomain.box(1, 5).quadrature_weights("gauss")


def test_partial_exact_on_quadratics():
    d = GridDomain.box(2, 9)
    x, y = d.mesh()
    dx = partial(x**2 + x * y, d, 0)
    assert np.allclose(dx, 2 * x + y)


def test_sym_derivative_of_gradient_field():
    d = GridDomain.box(2, 11)
    x, y = d.mesh()
    u = TensorField(d, 0, x**2 * y)
    du = sym_derivative(u)
    assert np.allclose(du.values[..., 0], 2 * x * y) and np.allclose(du.values[..., 1], x**2)


@settings(max_examples=20, deadline=None)
@given(m=st.integers(0, 2), seed=st.integers(0, 10**6))
def test_zero_boundary_divergence_is_minus_adjoint(m, seed):
    rng = np.random.default_rng(seed)
    d = GridDomain((7, 8), (0.3, 0.25), (0.0, -1.0))
    f = TensorField(d, m, rng.standard_normal(d.shape + (tc.num_components(2, m),)))
    g = TensorField(d, m + 1, rng.standard_normal(d.shape + (tc.num_components(2, m + 1),)))
    w = tc.multiplicities
    lhs = np.sum(w(2, m + 1) * sym_derivative(f, "zero").values * g.values)
    rhs = -np.sum(w(2, m) * f.values * divergence(g, "zero").values)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1)


def test_laplacian_and_iterated():
    d = GridDomain.box(2, 13)
    x, y = d.mesh()
    u = TensorField(d, 0, x**2 + 3 * y**2)
    assert np.allclose(laplacian(u).values, 8)
    dd = iterated("delta", 2, iterated("d", 2, u))
    assert np.abs(dd.values).max() < 1e-9
    with pytest.raises(ValueError):
        iterated("delta", 1, u)


def test_apply_coeff_op_derivative_convention():
    d = GridDomain.box(1, 9)
    (x,) = d.mesh()
    u = TensorField(d, 0, x**2)
    a1 = TensorField(d, 1, np.ones(d.shape + (1,)))
    out = apply_coeff_op([None, a1], u)
    assert np.allclose(out.scalar_values(), -1j * 2 * x)


def test_inner_integral_conjugates():
    d = GridDomain.box(1, 5)
    f = TensorField(d, 0, np.full(d.shape, 1j))
    assert np.isclose(inner_integral(f, f), 2.0)


def test_boundary_jets():
    d = GridDomain.box(2, 33)
    x, y = d.mesh()
    good = TensorField(d, 0, (1 - x**2) ** 4 * (1 - y**2) ** 4)
    bad = TensorField(d, 0, (1 - x**2) * (1 - y**2))
    ok, res = boundary_jets_vanish(good, 3)
    assert ok and res < 1e-3
    ok, res = boundary_jets_vanish(bad, 3)
    assert not ok and res > 0.5


def test_tensor_field_validation():
    d = GridDomain.box(2, 5)
    with pytest.raises(ValueError):
        TensorField(d, 2, np.zeros(d.shape + (2,)))
    with pytest.raises(ValueError):
        TensorField.zeros(d, 1) + TensorField.zeros(d, 2)
