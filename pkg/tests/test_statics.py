import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from wavemaps.batteries import log_bump
from wavemaps.errors import ConfigurationError, ConstructionError, DomainError, ResolutionError
from wavemaps.grid import geometric_grid
from wavemaps.statics import (L0LQ, L2Q, L3Q, LQ, Q, CutoffZ, VirialProfile, apply_A, apply_A0, bubble,
                              bubble_energy, ddQ, dQ, factor_apply, kappa, linearized, smooth_cutoff,
                              smooth_cutoff_prime, two_bubble)

KS = [2, 3, 4, 5, 6]


@pytest.fixture(scope="module")
def grid():
    return geometric_grid(1e-5, 1e5, 200)


@given(st.integers(2, 8), st.floats(1e-6, 1e6), st.floats(1e-3, 1e3))
@settings(max_examples=100, deadline=None)
def test_LQ_equals_k_sin_Q(k, r, lam):
    # k sin Q = 2k x / (1 + x^2) with x = (r/lam)^k, evaluated in high precision
    exact = float(oracles._lq(oracles.mp.mpf(r), k, oracles.mp.mpf(lam)))
    assert LQ(np.array([r]), k, lam)[0] == pytest.approx(exact, rel=1e-12)


@given(st.integers(2, 8), st.floats(1e-4, 1e4))
@settings(max_examples=100, deadline=None)
def test_lambda_derivatives_closed_forms(k, r):
    x = np.array([r])
    q = Q(x, k)[0]
    assert L2Q(x, k)[0] == pytest.approx(k * k / 2 * math.sin(2 * q), abs=1e-12)
    assert L3Q(x, k)[0] == pytest.approx(k**3 * math.cos(2 * q) * math.sin(q), abs=1e-11)
    # (1 + r d/dr) r Q' = 2 r Q' + r^2 Q''
    assert L0LQ(x, k)[0] == pytest.approx(2 * r * dQ(x, k)[0] + r * r * ddQ(x, k)[0], abs=1e-11)


def test_derivatives_against_finite_differences():
    r = np.linspace(0.2, 5, 50)
    h = 1e-5
    for k in (2, 5):
        fd = (Q(r + h, k, 1.3) - Q(r - h, k, 1.3)) / (2 * h)
        assert np.allclose(dQ(r, k, 1.3), fd, atol=1e-8)
        fd2 = (dQ(r + h, k, 1.3) - dQ(r - h, k, 1.3)) / (2 * h)
        assert np.allclose(ddQ(r, k, 1.3), fd2, atol=1e-7)


def test_Q_boundary_values_and_centre():
    r = np.array([1e-300, 1.0, 1e300])
    for k in KS:
        q = Q(r, k)
        assert q[0] == 0.0 and q[1] == pytest.approx(math.pi / 2) and q[2] == pytest.approx(math.pi)


def test_bubble_factory():
    f = bubble(3, "LQ", lam=2.0, underline=True)
    r = np.linspace(0.1, 10, 20)
    assert np.allclose(f(r), LQ(r, 3, 2.0) / 2.0)
    with pytest.raises(ConfigurationError):
        bubble(3, "L9Q")
    with pytest.raises(DomainError):
        bubble(1)
    with pytest.raises(DomainError):
        bubble(3, lam=0.0)


def test_two_bubble_tails_without_cancellation():
    r = np.array([1e-8, 1.0, 1e8])
    v = two_bubble(r, 2, 1e-3, 1.0)
    # near the origin Q_lam - Q_mu ~ 2 (r/lam)^2 (1 - lam^2 ...), far out ~ 2 (mu/r)^2 (1 - ...)
    assert v[0] == pytest.approx(2 * (1e-8 / 1e-3) ** 2, rel=1e-6)
    assert v[2] == pytest.approx(2 * (1 / 1e8) ** 2 * (1 - 1e-6), rel=1e-6)
    assert np.allclose(two_bubble(r, 2, 1e-3, 1.0, -1), -v)


@pytest.mark.parametrize("k", KS)
def test_kappa_closed_form_vs_oracle(k):
    assert kappa(k) == pytest.approx(oracles.kappa(k), rel=1e-12)
    assert bubble_energy(k) == 4 * math.pi * k


def test_smooth_cutoff_shape():
    y = np.linspace(0, 3, 3001)
    c = smooth_cutoff(y)
    assert np.all(c[y <= 1] == 1.0) and np.all(c[y >= 2] == 0.0)
    assert np.all(np.diff(c) <= 0)
    fd = np.gradient(c, y)
    assert np.allclose(smooth_cutoff_prime(y)[5:-5], fd[5:-5], atol=1e-4)


@pytest.mark.parametrize("k", KS)
def test_cutoff_Z_behaviour(k):
    Z = CutoffZ(k)
    r = np.geomspace(1e-6, 100, 2000)
    z = Z.values(r, underline=False)
    assert Z.values(np.array([0.0]))[0] == 0.0
    assert np.max(np.abs(z / r**k)) <= 2 * k + 1e-9
    assert np.all(z[r >= 2 * Z.B] == 0.0)


@pytest.mark.parametrize("k", KS)
def test_beta_close_to_kappa(k):
    beta = CutoffZ(k).beta
    assert 0.99 * kappa(k) < beta < kappa(k)


def test_cutoff_Z_rejects_bad_radius():
    with pytest.raises(ConfigurationError):
        CutoffZ(2, B=0.0)


def test_lambda0_values_match_finite_difference():
    Z = CutoffZ(3, 4.0)
    r = np.linspace(0.5, 12, 200)
    h = 1e-6
    fd = Z.values(r, underline=False) + r * (Z.values(r + h, underline=False) - Z.values(r - h, underline=False)) / (2 * h)
    assert np.allclose(Z.lambda0_values(r, underline=False), fd, atol=1e-6)


# ------------------------------------------------------------ virial profile
@pytest.mark.parametrize("c", [0.3, 0.1, 0.05])
def test_profile_constants_and_shape(c):
    R = 20.0
    prof = VirialProfile(c, R)
    assert prof.q(R / 2)[0] == pytest.approx(R * R / 8, rel=1e-14)
    r = np.geomspace(prof.R_tilde * 1.0001, prof.R_tilde * 100, 50)
    assert np.all(prof.qp(r) == 0.0)
    cs = prof.constants
    assert cs["P6_log_derivative"] <= c
    assert cs["P4_qpp_lower"] <= c and cs["P5_bilaplacian"] <= c
    # q is constant beyond R_tilde
    assert prof.q(prof.R_tilde * 2)[0] == pytest.approx(prof.q(prof.R_tilde * 5)[0], rel=1e-12)


def test_profile_width_grows_like_inverse_c():
    a, b = VirialProfile(0.1, 1.0), VirialProfile(0.05, 1.0)
    assert b.L / a.L == pytest.approx(2.0, rel=0.05)


def test_profile_qpp_matches_derivative_of_qp():
    prof = VirialProfile(0.2, 3.0)
    r = np.geomspace(1.0, prof.R_tilde * 2, 400)
    h = 1e-6 * r
    fd = (prof.qp(r + h) - prof.qp(r - h)) / (2 * h)
    assert np.allclose(prof.qpp(r), fd, atol=1e-6)


def test_profile_errors():
    with pytest.raises(ConfigurationError):
        VirialProfile(1.5, 1.0)
    with pytest.raises(ConstructionError):
        VirialProfile(0.01, 10.0, rtilde_cap=100.0)
    with pytest.raises(ConfigurationError):
        VirialProfile(0.1, 10.0, c0=0.1)


def test_profile_c0_target():
    prof = VirialProfile(0.1, 1e3, c0=1e-3, k=2)
    assert prof.constants["c0"] <= 1e-3
    with pytest.raises(ConstructionError):
        VirialProfile(0.1, 2.0, c0=1e-6, k=2)


@given(st.floats(-2.5, 2.5), st.floats(0.2, 0.6), st.floats(0.3, 3.0))
@settings(max_examples=25, deadline=None)
def test_A0_is_antisymmetric(centre, width, lam):
    g = geometric_grid(1e-3, 1e3, 400)
    prof = VirialProfile(0.2, 5.0)
    f = log_bump(g.nodes, math.exp(centre), width)
    val = g.integrate(f * apply_A0(prof, lam, f, g), "r")
    scale = g.integrate(f * f, "r") * (1 + 1 / lam)
    assert abs(val) <= 1e-8 * scale


def test_A_support_resolution_error():
    g = geometric_grid(1.0, 1e3, 10)
    prof = VirialProfile(0.2, 1.0)
    with pytest.raises(ResolutionError):
        apply_A(prof, 1e-3, np.ones(g.n), g)


# ------------------------------------------------------- linearised operator
@pytest.mark.parametrize("k", KS)
def test_kernel_annihilated(grid, k):
    r = grid.nodes
    lq = LQ(r, k, 2.0)
    inner = (r > 1e-3) & (r < 1e3)
    assert np.max(np.abs(factor_apply(k, 2.0, lq, grid)[inner])) < 1e-6
    assert np.max(np.abs(linearized(k, 2.0, lq, grid)[inner] * r[inner] ** 2)) < 1e-5


@given(st.integers(2, 5), st.floats(-2.0, 2.0), st.floats(0.2, 0.6))
@settings(max_examples=20, deadline=None)
def test_factorisation_quadratic_form(k, centre, width):
    # narrow bumps need 400 nodes per decade for 1e-6 agreement
    g = geometric_grid(1e-3, 1e3, 400)
    f = log_bump(g.nodes, math.exp(centre), width)
    lhs = g.integrate(linearized(k, 1.0, f, g) * f, "r")
    Af = factor_apply(k, 1.0, f, g)
    rhs = g.integrate(Af * Af, "r")
    assert lhs == pytest.approx(rhs, rel=1e-6)
    # adjoint relation <A f, f2> = <f, A* f2>
    f2 = log_bump(g.nodes, math.exp(-centre / 2), 0.5)
    a = g.integrate(Af * f2, "r")
    b = g.integrate(f * factor_apply(k, 1.0, f2, g, adjoint=True), "r")
    assert a == pytest.approx(b, rel=1e-6, abs=1e-9)
