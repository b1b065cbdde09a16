"""Localised virial identity along stored trajectories.

For a cutoff ``chi`` (1 on ``[0, 1]``, 0 beyond 3, ``|chi'| <= 1``) and
``chi_R = chi(r / R)``, smooth solutions satisfy

    d/dt <psi_t | chi_R r psi_r> = -||psi_t||^2 + Omega_R,

    Omega_R = int psi_t^2 (1 - chi_R) r dr
              - 1/2 int (psi_t^2 + psi_r^2 - k^2 sin^2 psi / r^2) (r/R) chi'(r/R) r dr.

Pairings use ``L^2(r dr)`` without the angular factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError
from .evolve import Trajectory
from .functionals import FieldPair, energy, l2_norm_sq
from .grid import RadialGrid, fd_weights


def virial_cutoff(s) -> np.ndarray:
    """Quintic step: 1 for ``s <= 1``, 0 for ``s >= 3``, slope at most ``15/16``."""
    y = np.clip((np.asarray(s, dtype=float) - 1.0) / 2.0, 0.0, 1.0)
    return 1.0 - y**3 * (10.0 - 15.0 * y + 6.0 * y * y)


def virial_cutoff_prime(s) -> np.ndarray:
    y = np.clip((np.asarray(s, dtype=float) - 1.0) / 2.0, 0.0, 1.0)
    return -15.0 * y**2 * (1.0 - y) ** 2


def check_radius(grid: RadialGrid, R: float) -> None:
    """``R`` must cover ten local node spacings and leave the support ``3R`` inside the grid."""
    if not R > 0.0:
        raise ConfigurationError("cutoff radius must be positive")
    if 3.0 * R > grid.r_max * (1 + 1e-12):
        raise ConfigurationError(f"cutoff radius {R:g} exceeds r_max / 3 = {grid.r_max / 3:g}")
    nodes = grid.nodes
    i = int(np.clip(np.searchsorted(nodes, R), 1, nodes.size - 1))
    if R < 10.0 * (nodes[i] - nodes[i - 1]):
        raise ConfigurationError(f"cutoff radius {R:g} is below ten grid spacings")


def pairing(fp: FieldPair, R: float) -> float:
    """``<psi_t | chi_R r psi_r>``."""
    check_radius(fp.grid, R)
    r = fp.grid.nodes
    return fp.grid.integrate(fp.psit * virial_cutoff(r / R) * r * fp.psi_r, "r")


def omega_parts(fp: FieldPair, R: float) -> tuple[float, float]:
    """The two addends of the cutoff error: exterior kinetic part (>= 0) and the Lagrangian part."""
    check_radius(fp.grid, R)
    g, r, k = fp.grid, fp.grid.nodes, fp.k
    s = r / R
    outer = g.integrate(fp.psit**2 * (1.0 - virial_cutoff(s)), "r")
    lagr = fp.psit**2 + fp.psi_r**2 - k * k * np.sin(fp.psi) ** 2 / r**2
    return outer, -0.5 * g.integrate(lagr * s * virial_cutoff_prime(s), "r")


def omega(fp: FieldPair, R: float) -> float:
    """Cutoff error term of the virial identity."""
    a, b = omega_parts(fp, R)
    return a + b


def exterior_energy(fp: FieldPair, R: float) -> float:
    """Energy outside radius ``R``; controls ``|omega|``."""
    return energy(fp, R)


def time_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Five-point finite-difference derivative on (possibly uneven) sample times."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    n = t.size
    if n < 3:
        raise DomainError("need at least three snapshots")
    width = min(5, n)
    start = np.clip(np.arange(n) - width // 2, 0, n - width)
    cols = start[:, None] + np.arange(width)[None, :]
    c = fd_weights(t, t[cols], 1)[:, :, 1]
    return np.einsum("ij,ij->i", c, f[cols])


@dataclass(frozen=True)
class VirialSeries:
    """Per-snapshot virial terms; ``residual`` is the identity defect."""

    R: float
    t: np.ndarray
    pairing: np.ndarray
    omega: np.ndarray
    kinetic: np.ndarray
    residual: np.ndarray

    HEADER = ("t", "pairing", "omega", "kinetic", "residual")

    def rows(self) -> list[list[float]]:
        return [list(map(float, row)) for row in zip(self.t, self.pairing, self.omega, self.kinetic, self.residual)]

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))


def virial_residual(traj: Trajectory | list, R: float, times=None) -> VirialSeries:
    """Evaluate the virial identity on stored snapshots.

    ``traj`` is a :class:`~wavemaps.evolve.Trajectory` or a list of field pairs
    (then ``times`` is required).  The time derivative of the pairing is
    taken by five-point differences on the snapshot times.
    """
    if isinstance(traj, Trajectory):
        snaps, times = traj.snapshots, traj.times
    else:
        snaps = traj
        if times is None:
            raise DomainError("times are required with a list of snapshots")
    if len(snaps) < 3:
        raise DomainError("need at least three snapshots")
    t = np.asarray(times, dtype=float)
    P = np.array([pairing(fp, R) for fp in snaps])
    W = np.array([omega(fp, R) for fp in snaps])
    K = np.array([l2_norm_sq(fp.psit, fp.grid) for fp in snaps])
    res = time_derivative(t, P) + K - W
    return VirialSeries(R, t, P, W, K, res)


def integrated_bound(series: VirialSeries) -> tuple[float, float]:
    """Both sides of the time-integrated identity.

    Returns ``(int ||psi_t||^2 dt, |P(t0)| + |P(t1)| + int |Omega_R| dt)``;
    the first never exceeds the second up to quadrature error.
    """
    order = np.argsort(series.t)
    t = series.t[order]
    lhs = float(integrate.simpson(series.kinetic[order], x=t))
    ends = abs(series.pairing[0]) + abs(series.pairing[-1])
    return lhs, ends + float(integrate.simpson(np.abs(series.omega[order]), x=t))


def integrated_gap(series: VirialSeries) -> float:
    """``int ||psi_t||^2 dt - (P(t0) - P(t1) + int Omega dt)``; zero for exact data.

    Measures the time-quadrature error of the sampled series independently
    of the pairing derivative.
    """
    order = np.argsort(series.t)
    t = series.t[order]
    kin = float(integrate.simpson(series.kinetic[order], x=t))
    om = float(integrate.simpson(series.omega[order], x=t))
    return kin - (series.pairing[order][0] - series.pairing[order][-1] + om)


def pairing_bound_constant(fp: FieldPair, R: float, d: float) -> float:
    """Ratio ``|pairing| / (R sqrt(d))``, bounded near the two-bubble family."""
    if d <= 0.0:
        return math.inf
    return abs(pairing(fp, R)) / (R * math.sqrt(d))


virial_pairing = pairing
omega_R = omega
