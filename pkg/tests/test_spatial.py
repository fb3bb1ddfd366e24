import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lagmhd.model import Grid
from lagmhd.spatial import (cumulative_from_left, ddy, div_flux, norms, trapezoid_weights,
                            trapz, weighted_div_flux)


def test_ddy_constant_is_zero():
    assert np.all(ddy(np.full(11, 3.5), 0.1) == 0.0)


def test_ddy_exact_on_affine_including_ends():
    y = Grid(1.0, 21).y
    assert np.allclose(ddy(y, 0.1), 1.0, rtol=0, atol=1e-13)


def test_ddy_exact_on_quadratic_interior():
    g = Grid(1.0, 21)
    y = g.y
    assert np.allclose(ddy(y**2, g.dy)[1:-1], 2 * y[1:-1], rtol=0, atol=1e-13)


def test_ddy_acts_columnwise():
    y = Grid(1.0, 21).y
    f = np.column_stack([y, 2 * y])
    assert np.allclose(ddy(f, 0.1), [[1.0, 2.0]], atol=1e-13)


def test_div_flux_of_constant_is_zero():
    J = 1.0 + np.linspace(0, 1, 15) ** 2
    assert np.allclose(div_flux(np.full(15, 2.0), J, 0.1), 0.0, atol=0)


def test_div_flux_second_difference():
    g = Grid(1.0, 21)
    out = div_flux(g.y**2, np.ones(21), g.dy)
    assert np.allclose(out[1:-1], 2.0, atol=1e-11)


def test_div_flux_second_order_with_variable_J():
    errs = []
    for n in (41, 81, 161):
        g = Grid(1.0, n)
        y = g.y
        out = div_flux(y, 1 + y**2, g.dy)
        exact = -2 * y / (1 + y**2) ** 2
        errs.append(np.max(np.abs(out - exact)[1:-1]))
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.8 < r < 2.2 for r in rates)


def test_div_flux_rejects_nonpositive_J():
    with pytest.raises(ValueError):
        div_flux(np.zeros(5), np.array([1.0, 1.0, 0.0, 1.0, 1.0]), 0.1)


def test_weighted_div_flux_flags_vacuum_faces_without_warning():
    coef = np.array([0.0, 0.0, 1.0, 1.0, 1.0, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        out = weighted_div_flux(np.arange(6.0) ** 2, coef, 0.1)
    assert not np.isfinite(out[0])
    assert np.allclose(out[3:5], 200.0)  # phi = (y/dy)^2


_fields = arrays(np.float64, 12, elements=st.floats(-10, 10))
_jacobians = arrays(np.float64, 12, elements=st.floats(0.1, 10))


@given(f=_fields, g=_fields, J=_jacobians)
@settings(max_examples=200, deadline=None)
def test_div_flux_symmetric_under_trapezoid_pairing(f, g, J):
    w = trapezoid_weights(12, 0.3)
    lhs = np.sum(w * f * div_flux(g, J, 0.3))
    rhs = np.sum(w * g * div_flux(f, J, 0.3))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@given(f=_fields, J=_jacobians)
@settings(max_examples=200, deadline=None)
def test_div_flux_is_dissipative(f, J):
    w = trapezoid_weights(12, 0.3)
    assert np.sum(w * f * div_flux(f, J, 0.3)) <= 1e-9


def test_cumulative_of_zero_and_one():
    g = Grid(3.0, 31)
    assert np.all(cumulative_from_left(np.zeros(31), g.dy) == 0.0)
    assert np.allclose(cumulative_from_left(np.ones(31), g.dy), g.y + 3.0, rtol=0, atol=1e-13)


def test_cumulative_mass_matches_total():
    g = Grid(20.0, 4001)
    rho = np.exp(-g.y**2)
    mass = cumulative_from_left(rho, g.dy)
    assert mass[-1] == pytest.approx(math.sqrt(math.pi), rel=1e-10)
    assert mass[-1] == pytest.approx(trapz(rho, g.dy), rel=1e-14)


def test_norms_of_zero_and_one():
    assert norms(np.zeros(11), 0.2) == {"l1": 0.0, "l2": 0.0, "linf": 0.0}
    out = norms(np.ones(21), 0.1)
    assert out["l1"] == pytest.approx(2.0)
    assert out["l2"] == pytest.approx(math.sqrt(2.0))
    assert out["linf"] == 1.0


def test_norms_use_vector_magnitude():
    f = np.column_stack([np.full(11, 3.0), np.full(11, 4.0)])
    assert norms(f, 0.1)["linf"] == pytest.approx(5.0)
