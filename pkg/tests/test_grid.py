import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavemaps.errors import ConfigurationError, DomainError, ResolutionError
from wavemaps.functionals import h_norm
from wavemaps.grid import (RadialGrid, diff, geometric_grid, hybrid_grid, monotone_cubic, quad, rescale,
                           uniform_grid)
from wavemaps.statics import Q


def test_uniform_spacing():
    g = uniform_grid(10.0, 200)
    assert np.allclose(np.diff(g.nodes), 0.05, rtol=0, atol=1e-13)
    assert g.nodes[0] == pytest.approx(0.05)
    assert g.r_max == pytest.approx(10.0)


def test_geometric_ratio_is_constant():
    g = geometric_grid(1e-3, 1e3, 50)
    ratios = g.nodes[1:] / g.nodes[:-1]
    assert np.ptp(ratios) < 1e-12
    assert ratios[0] == pytest.approx(10 ** (1 / 50), rel=1e-12)
    assert g.log_spaced


def test_hybrid_switch_beyond_outer_radius_rejected():
    with pytest.raises(ConfigurationError):
        hybrid_grid(1e-3, 20.0, 10.0)


def test_hybrid_spacing_continuous():
    g = hybrid_grid(1e-3, 1.0, 5.0, 100)
    steps = np.diff(g.nodes)
    j = np.searchsorted(g.nodes, 1.0)
    assert steps[j] == pytest.approx(steps[j - 1], rel=0.05)


@pytest.mark.parametrize("bad", [np.array([1.0, 2.0, 2.0, 3.0, 4.0, 5.0]), np.array([-1.0, 1, 2, 3, 4, 5]),
                                 np.array([1.0, 2.0, 3.0])])
def test_invalid_nodes_rejected(bad):
    with pytest.raises(ConfigurationError):
        RadialGrid(bad)


def test_quad_of_zero_is_exactly_zero():
    g = geometric_grid(1e-4, 1e4, 40)
    res = quad(g, np.zeros(g.n))
    assert res.value == 0.0 and res.error == 0.0


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
@settings(max_examples=30, deadline=None)
def test_cubic_polynomials_integrate_exactly(coef):
    g = uniform_grid(2.0, 40)
    r = g.nodes
    p = np.polynomial.Polynomial(coef)
    exact = p.integ()(2.0) - p.integ()(0.0)
    assert g.integrate(p(r), "dr") == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_quad_power_tails():
    g = geometric_grid(1e-3, 1e3, 100)
    r = g.nodes
    # int_0^inf r / (1 + r^2)^2 dr = 1/2, with both tails outside the grid
    res = quad(g, r / (1 + r * r) ** 2, "dr")
    assert res.value == pytest.approx(0.5, rel=1e-9)
    assert res.error < 1e-5


@pytest.mark.parametrize("lam", [0.1, 0.5, 3.0, 20.0])
def test_h_norm_scale_invariance(lam):
    g = geometric_grid(1e-5, 1e5, 100)
    f = Q(g.nodes, 2) * np.exp(-g.nodes)  # class zero at both ends
    base = h_norm(f, g, 2)
    assert h_norm(rescale(g, f, lam), g, 2) == pytest.approx(base, rel=1e-5)


def test_rescale_identity_and_centre():
    g = geometric_grid(1e-4, 1e4, 100)
    q = Q(g.nodes, 3)
    assert np.array_equal(rescale(g, q, 1.0), q)
    lam = 2.7
    assert g.interpolate(rescale(g, q, lam), lam) == pytest.approx(math.pi / 2, abs=1e-8)


def test_rescale_off_grid_raises():
    g = geometric_grid(1e-2, 1e2, 50)
    f = np.exp(-np.log(g.nodes) ** 2)
    with pytest.raises(ResolutionError):
        rescale(g, f, 1e3)
    with pytest.raises(DomainError):
        rescale(g, f, -1.0)


def test_differential_operators():
    g = uniform_grid(4.0, 400)
    r = g.nodes
    assert np.allclose(diff(g, "Delta2", r**2), 4.0, atol=1e-8)
    assert np.allclose(diff(g, "dd", r**2) + 3 * diff(g, "d", r**2) / r, 8.0, atol=1e-8)
    f = np.sin(r)
    assert np.allclose(diff(g, "Lambda0", f), f + diff(g, "Lambda", f), atol=1e-14)
    with pytest.raises(ConfigurationError):
        diff(g, "curl", f)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_bubble_slope_at_one(k):
    g = geometric_grid(1e-3, 1e3, 100)
    dq = diff(g, "d", Q(g.nodes, k))
    assert g.interpolate(dq, 1.0) == pytest.approx(k, rel=1e-8)


def test_derivative_convergence_order():
    errs = []
    for n in (20, 40):
        g = geometric_grid(1e-2, 1e2, n)
        x = np.log(g.nodes)
        f = np.exp(-x * x)
        errs.append(np.max(np.abs(g.d(f) + 2 * x * f / g.nodes)))
    # nine-point stencils: well beyond second order
    assert math.log2(errs[0] / errs[1]) > 6


def test_text_round_trip():
    for g in (uniform_grid(3.0, 60), geometric_grid(1e-3, 1e3, 20), hybrid_grid(1e-2, 1.0, 4.0, 30)):
        back = RadialGrid.from_text(g.to_text())
        assert np.array_equal(back.nodes, g.nodes)
        assert np.array_equal(back.weights, g.weights)
        assert back.kind == g.kind and back.from_origin == g.from_origin


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=30).map(np.cumsum))
@settings(max_examples=50, deadline=None)
def test_monotone_cubic_never_overshoots_monotone_data(y):
    y = np.maximum.accumulate(y)
    x = np.arange(y.size, dtype=float)
    fine = monotone_cubic(x, y)(np.linspace(0, y.size - 1, 20 * y.size))
    assert np.all(np.diff(fine) >= -1e-9 * (1 + np.abs(fine[1:])))
