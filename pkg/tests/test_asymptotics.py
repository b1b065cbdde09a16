import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from wavemaps import asymptotics as asy
from wavemaps.errors import DomainError
from wavemaps.statics import kappa

KS = [2, 3, 4, 5, 6]


def test_kappa_for_k3():
    assert asy.kappa_numeric(3) == pytest.approx(4 * math.pi / math.sqrt(3), rel=1e-8)
    assert 4 * math.pi / math.sqrt(3) == pytest.approx(7.2552, abs=1e-4)


@pytest.mark.parametrize("k", KS)
def test_moments_against_mpmath(k):
    assert asy.kappa_numeric(k) == pytest.approx(oracles.kappa(k), rel=1e-10)
    assert asy.cubic_moment(k) == pytest.approx(oracles.cubic_moment(k), rel=1e-10)
    assert oracles.cubic_moment(k) == pytest.approx(2 * k * k, rel=1e-15)


@pytest.mark.parametrize("k", KS)
@pytest.mark.parametrize("sigma", [1e-3, 1e-2, 0.1])
def test_interaction_against_mpmath(k, sigma):
    assert asy.interaction_integral(k, sigma) == pytest.approx(oracles.interaction(k, sigma), rel=1e-10)
    assert asy.cross_term(k, sigma) == pytest.approx(oracles.cross_closed_form(k, sigma), rel=1e-10)


def test_interaction_leading_value_k2():
    val = asy.interaction_integral(2, 1e-2)
    assert val == pytest.approx(3.2e-3, rel=1e-3)


@pytest.mark.parametrize("k", [2, 3])
def test_remainder_without_cancellation(k):
    sigma = 0.1
    direct = oracles.interaction(k, sigma) - 16 * k * sigma**k
    assert asy.interaction_remainder(k, sigma) == pytest.approx(direct, rel=1e-8)


@pytest.mark.parametrize("k", KS)
def test_remainder_order(k):
    a, b = asy.interaction_remainder(k, 0.01), asy.interaction_remainder(k, 0.005)
    rel_a = a / asy.interaction_prediction(k, 0.01)
    rel_b = b / asy.interaction_prediction(k, 0.005)
    assert math.log2(rel_a / rel_b) >= 2 * k - 0.5


def test_bprime_example():
    assert asy.bprime_pairing(2, 1e-2) == pytest.approx(0.32, rel=0.05)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_bprime_against_high_precision(k):
    assert asy.bprime_pairing(k, 1e-3) == pytest.approx(oracles.bprime(k, 1e-3), rel=1e-9)
    assert asy.bprime_pairing(k, 1e-3) == pytest.approx(asy.bprime_prediction(k, 1e-3), rel=0.05)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_slopes(k):
    sig = np.geomspace(1e-3, 1e-1, 7)
    assert asy.loglog_slope(sig, [asy.interaction_integral(k, s) for s in sig]) == pytest.approx(k, abs=0.01)
    lam = np.geomspace(1e-4, 1e-2, 7)
    assert asy.loglog_slope(lam, [asy.bprime_pairing(k, s) for s in lam]) == pytest.approx(k - 1, abs=0.02)


def test_cross_term_ratio_bounded():
    for k in (2, 3):
        ratios = [asy.cross_term(k, s) / (s**k * abs(math.log(s))) for s in np.geomspace(1e-4, 0.2, 10)]
        assert max(ratios) <= 4 * k * k * 1.1


def test_report_rows_and_range():
    rows = asy.interaction_report(3, 1e-2)
    assert [r.quantity.split("(")[0] for r in rows] == ["kappa", "cubic_moment", "interaction",
                                                        "interaction_rel_remainder", "bprime_pairing", "cross_term"]
    assert rows[0].rel_dev <= 1e-8 and rows[1].rel_dev <= 1e-8
    assert asy.SummaryRow.HEADER == ("k", "quantity", "computed", "predicted", "rel_dev")
    for bad in (1e-5, 0.3):
        with pytest.raises(DomainError):
            asy.interaction_report(2, bad)


def test_interaction_domain():
    with pytest.raises(DomainError):
        asy.interaction_integral(2, 1.5)
    with pytest.raises(DomainError):
        asy.bprime_pairing(2, 2.0, 1.0)


# ------------------------------------------------------------- reduced ODE
@given(st.integers(2, 5), st.floats(1e-3, 0.1))
@settings(max_examples=15, deadline=None)
def test_zero_momentum_is_time_symmetric(k, z0):
    fwd = asy.integrate_ode(k, z0, 0.0, direction=1)
    bwd = asy.integrate_ode(k, z0, 0.0, direction=-1)
    # both directions leave through the top at mirror-image times
    assert fwd.stop_reason == bwd.stop_reason == "zeta reached the upper limit"
    assert fwd.t[-1] == pytest.approx(-bwd.t[-1], rel=1e-9)


def test_k2_exponential_rate():
    traj = asy.integrate_ode(2, 1e-4, 0.0, zeta_stop=0.19)
    fit = asy.rate_fit(traj, "exponential")
    assert fit.rate == pytest.approx(math.sqrt(16 / math.pi), rel=1e-3)
    assert asy.rate_prediction(2) == pytest.approx(2.2568, abs=1e-4)


@pytest.mark.parametrize("k", [3, 4])
def test_power_law_exponent_and_gamma(k):
    z0 = 0.01
    traj = asy.integrate_ode(k, z0, -asy.separatrix_b(k, z0))
    fit = asy.rate_fit(traj, "power")
    assert fit.rate == pytest.approx(asy.exponent_prediction(k), rel=1e-2)
    assert fit.prefactor == pytest.approx(asy.gamma_prediction(k), rel=1e-2)


def test_gamma_k4_closed_form():
    # alpha = 1: gamma^2 = kappa * 2 / 128 with kappa = 2 pi sqrt 2
    assert asy.gamma_prediction(4) == pytest.approx(math.sqrt(2 * math.pi * math.sqrt(2) * 2 / 128), rel=1e-14)


def test_gamma_independent_of_start():
    fits = []
    # roundoff in the zero level grows like (zeta0/zeta)^k, so keep the span to two decades
    for z0 in (0.01, 0.005):
        traj = asy.integrate_ode(4, z0, -asy.separatrix_b(4, z0))
        fits.append(asy.rate_fit(traj, "power").prefactor)
    assert fits[0] == pytest.approx(fits[1], rel=1e-3)


@given(st.integers(2, 6), st.floats(1e-3, 0.15), st.floats(-1.0, 1.0), st.sampled_from([1, -1]))
@settings(max_examples=25, deadline=None)
def test_invariant_conserved(k, z0, frac, direction):
    b0 = frac * asy.b_bound(k, z0)
    traj = asy.integrate_ode(k, z0, b0, direction=direction, horizon=1e6)
    inv = traj.invariant
    scale = np.max(8 * k * traj.zeta**k + traj.b**2 / (2 * kappa(k)))
    assert np.max(np.abs(inv - inv[0])) <= 1e-10 * scale


@given(st.integers(2, 6), st.floats(1e-3, 0.15), st.floats(0.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_xi_monotone_while_positive(k, z0, frac):
    # start anywhere with xi > 0: b0 ranges from just above -kappa1 zeta0^(k/2) up to the bound
    lo = -asy.kappa1(k) * z0 ** (k / 2)
    b0 = lo + frac * (asy.b_bound(k, z0) - lo) + 1e-9 * abs(lo)
    traj = asy.integrate_ode(k, z0, b0, horizon=1e6)
    assert np.all(traj.xi > 0)
    assert np.all(traj.xi_dot > 0)
    assert traj.xi_monotone()
    # backwards in time xi still decreases as long as it stays positive
    back = asy.integrate_ode(k, z0, b0, direction=-1, horizon=1e6)
    pos = back.xi > 0
    assert np.all(back.xi_dot[pos] > 0)


def test_xi_can_turn_when_negative():
    # the monotonicity needs xi > 0: deep in the negative branch xi' changes sign
    traj = asy.integrate_ode(2, 0.125, -asy.b_bound(2, 0.125))
    assert np.all(traj.xi < 0)
    assert traj.xi_dot[0] > 0 > traj.xi_dot[-1]


def test_kappa2_positive():
    traj = asy.integrate_ode(3, 0.01, 0.0)
    assert traj.kappa2() > 0


def test_ode_preconditions():
    with pytest.raises(DomainError):
        asy.integrate_ode(2, 0.3, 0.0)
    with pytest.raises(DomainError):
        asy.integrate_ode(2, 0.01, 10 * asy.b_bound(2, 0.01))
    with pytest.raises(DomainError):
        asy.exponent_prediction(2)
    with pytest.raises(DomainError):
        asy.rate_prediction(3)


def test_rate_fit_needs_two_decades():
    traj = asy.integrate_ode(2, 0.1, 0.0, zeta_stop=0.5)
    with pytest.raises(DomainError):
        asy.rate_fit(traj, "exponential")


def test_compare_with_ode_on_exact_series():
    traj = asy.integrate_ode(2, 1e-3, 0.0, zeta_stop=0.19)
    t = np.linspace(0, traj.t[-1], 200)
    from scipy.interpolate import CubicSpline

    z = np.exp(CubicSpline(traj.t, np.log(traj.zeta))(t))
    cmp = asy.compare_with_ode(t, z, 0.0)
    assert cmp.rel_dev <= 1e-4
