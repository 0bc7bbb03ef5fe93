import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from germlab.errors import DomainError
from germlab.testfn import (
    BUMP_INTEGRAL_1D,
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    bump_ensemble,
    cr_norm,
    integral,
    linear_combination,
    moment,
    polynomial_bump,
    rescale,
    standard_bump,
    unit_bump,
)

E_INV = math.exp(-1.0)
FINE = QuadratureSpec(panels_per_unit=256)


def test_bump_integral_matches_fine_rule():
    assert abs(integral(standard_bump()) - integral(standard_bump(), FINE)) < 1e-12
    assert abs(integral(standard_bump()) - 0.4439938) < 1e-7
    assert abs(BUMP_INTEGRAL_1D - integral(standard_bump(), FINE)) < 1e-12


def test_rescale_identity_case():
    f = standard_bump()
    y = np.linspace(-1.5, 1.5, 1000)
    assert np.array_equal(rescale(f, 0.0, 1.0)(y), f(y))


def test_rescale_value_and_support():
    g = rescale(standard_bump(), 0.5, 0.25)
    assert g(np.array([0.5]))[0] == pytest.approx(4 * E_INV, abs=1e-12)
    lo, hi = g.support_box()
    assert lo[0] == pytest.approx(0.25) and hi[0] == pytest.approx(0.75)
    outside = np.concatenate([np.linspace(-2, 0.25, 200), np.linspace(0.75, 3, 200)])
    assert np.all(g(outside) == 0.0)


def test_rescale_rejects_nonpositive_scale():
    with pytest.raises(DomainError):
        rescale(standard_bump(), 0.0, 0.0)
    with pytest.raises(DomainError):
        rescale(standard_bump(), 0.0, -1.0)


@pytest.mark.parametrize("x, lam", [(0.0, 1.0), (0.3, 0.1), (-2.0, 0.01)])
def test_integral_invariance(x, lam):
    f = standard_bump()
    assert abs(integral(rescale(f, x, lam)) - integral(f, FINE)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-5, 5), lam=st.floats(1e-3, 10.0),
       c=st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_integral_invariance_polynomial_bumps(x, lam, c):
    f = polynomial_bump(c)
    assert abs(integral(rescale(f, x, lam)) - integral(f)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(x1=st.floats(-3, 3), l1=st.floats(0.05, 2), x2=st.floats(-3, 3), l2=st.floats(0.05, 2))
def test_nested_rescale_composes(x1, l1, x2, l2):
    f = standard_bump()
    nested = rescale(rescale(f, x1, l1), x2, l2)
    direct = rescale(f, x2 + l2 * x1, l1 * l2)
    assert nested.center == pytest.approx(direct.center, abs=1e-12)
    assert nested.scale == pytest.approx(direct.scale, rel=1e-14)


def test_cr_norm_values():
    assert cr_norm(standard_bump(), 0) == pytest.approx(E_INV, rel=1e-12)
    assert cr_norm(standard_bump().scaled(0.0), 3) == 0.0


@pytest.mark.parametrize("lam", [1.0, 0.5, 0.25])
@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_cr_scaling_law(lam, r):
    f = standard_bump()
    u = np.linspace(-1, 1, 10_001)
    sups = [np.max(np.abs(f.derivative(u, k))) for k in range(r + 1)]
    expected = max(lam ** (-k - 1) * s for k, s in enumerate(sups))
    assert cr_norm(rescale(f, 0.0, lam), r) == pytest.approx(expected, rel=0.01)


def test_derivative_matches_finite_differences():
    f = polynomial_bump([0.3, -0.5, 0.8])
    y = np.linspace(-0.8, 0.8, 41)
    h = 1e-5
    fd = (f(y + h) - f(y - h)) / (2 * h)
    assert np.max(np.abs(f.derivative(y, 1) - fd)) < 1e-7


def test_linearity_of_integral():
    a, b = standard_bump(), rescale(polynomial_bump([1.0, 0.5]), 0.4, 0.3)
    combo = linear_combination([(2.0, a), (-3.0, b)])
    assert integral(combo) == pytest.approx(2 * integral(a) - 3 * integral(b), abs=1e-13)


def test_unit_bump_and_moments():
    u = unit_bump()
    assert integral(u) == pytest.approx(1.0, abs=1e-13)
    assert abs(moment(u, 1)) < 1e-15
    assert abs(moment(rescale(u, 2.0, 0.1), 1) - 2.0) < 1e-12


def test_quadrature_converges_under_panel_doubling():
    f = rescale(polynomial_bump([0.2, 1.0, -0.4]), 0.1, 0.7)
    assert abs(integral(f, DEFAULT_QUADRATURE) - integral(f, DEFAULT_QUADRATURE.refined())) < 1e-9


def test_bump_ensemble_is_seeded_and_supported():
    a, b = bump_ensemble(5, seed=3), bump_ensemble(5, seed=3)
    y = np.linspace(-1, 1, 101)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa(y), fb(y))
        assert fa.support_radius <= 1.0
    assert not np.array_equal(a[0](y), bump_ensemble(1, seed=4)[0](y))


def test_two_dimensional_bump_integral():
    f = standard_bump(2)
    coarse = integral(f, QuadratureSpec(panels_per_unit=8))
    assert coarse == pytest.approx(integral(f, QuadratureSpec(panels_per_unit=16)), abs=1e-9)
    assert integral(rescale(f, [0.3, -0.2], 0.5), QuadratureSpec(panels_per_unit=8)) == pytest.approx(coarse, abs=1e-12)
