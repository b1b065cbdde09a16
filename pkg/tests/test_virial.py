import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from wavemaps.batteries import near_two_bubble, smooth_compact
from wavemaps.errors import ConfigurationError, DomainError
from wavemaps.evolve import evolution_grid, evolve, init_state
from wavemaps.functionals import FieldPair, bubble_distance
from wavemaps.grid import geometric_grid, uniform_grid
from wavemaps.statics import Q
from wavemaps.virial import (VirialSeries, exterior_energy, integrated_bound, integrated_gap, omega, omega_parts,
                             pairing, pairing_bound_constant, virial_cutoff, virial_cutoff_prime, virial_residual)


@pytest.fixture(scope="module")
def grid():
    return geometric_grid(1e-5, 1e3, 200)


def test_cutoff_normalisation():
    s = np.linspace(0, 4, 40001)
    chi = virial_cutoff(s)
    assert np.all(chi[s <= 1] == 1.0) and np.all(chi[s >= 3] == 0.0)
    assert np.max(np.abs(virial_cutoff_prime(s))) <= 1.0
    fd = np.gradient(chi, s)
    assert np.allclose(virial_cutoff_prime(s)[1:-1], fd[1:-1], atol=1e-6)


def test_static_pairing_vanishes(grid):
    fp = FieldPair(grid, Q(grid.nodes, 2), None, 2, 0, 1)
    assert pairing(fp, 10.0) == 0.0


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_omega_of_static_bubble_vanishes(grid, lam):
    fp = FieldPair(grid, Q(grid.nodes, 3, lam), None, 3, 0, 1)
    assert abs(omega(fp, 10.0)) <= 1e-10


def test_pairing_with_planted_velocity(grid):
    k, R = 2, 5.0
    r = grid.nodes
    psi = smooth_compact(r, k, 0.6, 1.0)
    static = FieldPair(grid, psi, None, k)
    fp = FieldPair(grid, psi, static.psi_r, k)

    def dpsi(x):
        return 0.6 * (k * x ** (k - 1) - 2 * x ** (k + 1)) * math.exp(-x * x)

    exact = integrate.quad(lambda x: dpsi(x) ** 2 * float(virial_cutoff(x / R)) * x * x, 0, 3 * R,
                           epsabs=0, epsrel=1e-13, limit=200)[0]
    assert pairing(fp, R) == pytest.approx(exact, rel=1e-10)


def test_pairing_bounded_by_root_d():
    g = geometric_grid(1e-5, 1e5, 100)
    rng = np.random.default_rng(4)
    for _ in range(5):
        fp = near_two_bubble(g, rng)
        d = bubble_distance(fp, sign=1).d
        assert pairing_bound_constant(fp, 10.0, d) <= 5.0


@given(st.floats(0.1, 1.5), st.floats(0.3, 2.0), st.floats(0.5, 3.0), st.floats(-1.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_omega_bounded_by_exterior_energy(amp, width, R, vel):
    g = geometric_grid(1e-5, 1e3, 100)
    r = g.nodes
    fp = FieldPair(g, smooth_compact(r, 2, amp, width, 1.0), smooth_compact(r, 3, vel, width, 1.5), 2)
    outer, lagr = omega_parts(fp, R)
    assert outer >= 0.0
    # |outer| <= E/pi and |lagr| <= (45/32) E/pi with E the exterior energy
    assert abs(outer + lagr) <= (1 + 45 / 32) / math.pi * exterior_energy(fp, R) * (1 + 1e-8) + 1e-14


def test_omega_decays_with_radius(grid):
    r = grid.nodes
    fp = FieldPair(grid, smooth_compact(r, 2, 0.6, 1.0), smooth_compact(r, 2, 0.4, 1.0, 1.0), 2)
    vals = [abs(omega(fp, R)) for R in (5.0, 10.0, 20.0, 40.0)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= 1e-12


def test_exterior_energy_nonincreasing(grid):
    r = grid.nodes
    fp = FieldPair(grid, smooth_compact(r, 2, 0.9, 2.0), smooth_compact(r, 2, 0.3), 2)
    ext = [exterior_energy(fp, R) for R in np.geomspace(0.1, 100, 30)]
    assert np.all(np.diff(ext) <= 1e-14)


def test_radius_range_errors():
    g = uniform_grid(12.0, 1200)
    fp = FieldPair(g, smooth_compact(g.nodes, 2), None, 2)
    for R in (-1.0, 0.05, 5.0):
        with pytest.raises(ConfigurationError):
            pairing(fp, R)
    with pytest.raises(ConfigurationError):
        omega(fp, 4.5)
    pairing(fp, 4.0)


def test_static_trajectory_residual_is_truncation_only():
    # discrete Q is static only up to the spatial truncation error, so the residual converges to 0
    res = []
    for h in (0.04, 0.02, 0.01):
        g = evolution_grid(12.0, h)
        traj = evolve(init_state(Q(g.nodes, 2), None, 2, g), 0.5, snapshot_every=0.1)
        res.append(virial_residual(traj, 2.0).max_residual)
    assert res[-1] <= 1e-7
    assert min(math.log2(a / b) for a, b in zip(res, res[1:])) >= 3.5


def test_residual_needs_three_snapshots():
    g = evolution_grid(12.0, 0.04)
    traj = evolve(init_state(Q(g.nodes, 2), None, 2, g), 0.04, snapshot_every=0.04)
    with pytest.raises(DomainError):
        virial_residual(traj.snapshots[:2], 2.0, traj.times[:2])
    with pytest.raises(DomainError):
        virial_residual(traj.snapshots, 2.0)


def test_integrated_bound_on_smooth_run():
    g = evolution_grid(10.0, 0.02)
    r = g.nodes
    s = init_state(smooth_compact(r, 2, 0.6), smooth_compact(r, 2, 0.4, 1.2), 2, g, horizon=2.0)
    traj = evolve(s, 2.0, snapshot_every=0.05)
    series = virial_residual(traj, 2.0)
    assert isinstance(series, VirialSeries) and len(series.rows()) == len(traj.times)
    kin, bound = integrated_bound(series)
    assert kin <= bound + abs(integrated_gap(series))
    assert series.max_residual <= 1e-3
