"""Time evolution of the equivariant wave map equation.

The field is evolved through ``u = psi / r``, which solves the radial wave
equation

    u_tt = u_rr + (3/r) u_r - (k^2 - 1) u / r^2 + N(r u) u^3,
    N(rho) = k^2 (2 rho - sin 2 rho) / (2 rho^3),

on a uniform grid including the origin.  Space uses fourth-order centred
differences, time uses classical RK4.  Near the origin ``u`` behaves like
``r^(k-1)`` times an even function, so ghost values are reflected with parity
``(-1)^(k-1)``; with that choice the singular terms cancel exactly on the
low-order Taylor modes.  The two outermost nodes are frozen at their initial
values, which is harmless while no signal has reached them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import AccuracyWarning, ConfigurationError, DomainError
from .functionals import FieldPair, energy, l2_norm_sq
from .grid import RadialGrid, uniform_grid
from .statics import two_bubble

BLOWUP_SUP = 1e6
DRIFT_HALT = 1e-2


def nonlinear_factor(rho: np.ndarray, k: int) -> np.ndarray:
    """``k^2 (2 rho - sin 2 rho) / (2 rho^3)``, with its Taylor series near 0."""
    rho = np.asarray(rho, dtype=float)
    x2 = (2.0 * rho) ** 2
    small = np.abs(rho) < 1e-2
    safe = np.where(small, 1.0, rho)
    direct = (2.0 * safe - np.sin(2.0 * safe)) / (2.0 * safe**3)
    # (x - sin x) / x^3 with x = 2 rho, times 8 / 2
    series = 4.0 * (1.0 / 6.0 - x2 / 120.0 + x2**2 / 5040.0 - x2**3 / 362880.0)
    return k * k * np.where(small, series, direct)


@dataclass(frozen=True, eq=False)
class SimState:
    """Evolution state on a uniform grid; arrays include the origin node."""

    k: int
    grid: RadialGrid
    u: np.ndarray
    ut: np.ndarray
    t: float = 0.0
    cfl: float = 0.5
    frozen: np.ndarray = field(default=None, repr=False)
    budget: float | None = None

    @property
    def h(self) -> float:
        return float(self.grid.nodes[0])

    @property
    def dt(self) -> float:
        return self.h * min(self.cfl, stable_ratio(self.k))

    @property
    def radii(self) -> np.ndarray:
        return np.concatenate([[0.0], self.grid.nodes])

    def field_pair(self) -> FieldPair:
        r = self.grid.nodes
        return FieldPair.infer(self.grid, r * self.u[1:], r * self.ut[1:], self.k, class_tol=math.inf)


def _check_uniform(grid: RadialGrid) -> None:
    if grid.kind != "uniform":
        raise ConfigurationError("evolution needs a uniform grid")


def _acceleration(u: np.ndarray, k: int, h: float, r: np.ndarray, parity: float) -> np.ndarray:
    n = u.size
    pad = np.empty(n + 2)
    pad[2:] = u
    pad[0] = parity * u[2]
    pad[1] = parity * u[1]
    # centred stencils for nodes 1 .. n-3 (index j in u maps to j + 2 in pad)
    um2, um1, u0, up1, up2 = pad[1:n - 2], pad[2:n - 1], pad[3:n], pad[4:n + 1], pad[5:n + 2]
    urr = (-um2 + 16.0 * um1 - 30.0 * u0 + 16.0 * up1 - up2) / (12.0 * h * h)
    ur = (um2 - 8.0 * um1 + 8.0 * up1 - up2) / (12.0 * h)
    rr = r[1:n - 2]
    acc = np.zeros(n)
    acc[1:n - 2] = urr + 3.0 * ur / rr - (k * k - 1) * u0 / rr**2 + nonlinear_factor(rr * u0, k) * u0**3
    return acc


def _parity(k: int) -> float:
    return -1.0 if (k - 1) % 2 else 1.0


def stable_ratio(k: int) -> float:
    """Largest safe ``dt / h`` for RK4: the potential term near the origin stiffens like ``k^2``."""
    return 2.5 / math.sqrt(k * k + 3.0)


def init_state(psi0, psi1, k: int, grid: RadialGrid, cfl: float = 0.5, horizon: float | None = None,
               support_tol: float = 1e-9) -> SimState:
    """Build an evolution state from ``(psi0, psi1)`` sampled on ``grid`` (or callables of ``r``).

    With ``horizon`` given, the outer radius must exceed the data support plus
    ``|horizon| + 2`` so that the frozen boundary stays causally inert.
    """
    _check_uniform(grid)
    if int(k) != k or k < 2:
        raise DomainError("equivariance class must be an integer >= 2")
    if not 0.0 < cfl <= 0.5:
        raise ConfigurationError("cfl must lie in (0, 0.5]")
    r = grid.nodes
    p0 = np.asarray(psi0(r) if callable(psi0) else psi0, dtype=float)
    p1 = np.zeros_like(r) if psi1 is None else np.asarray(psi1(r) if callable(psi1) else psi1, dtype=float)
    if p0.shape != r.shape or p1.shape != r.shape:
        raise DomainError("data do not match the grid")
    if abs(p0[-1] / math.pi - round(p0[-1] / math.pi)) > 0.25:
        raise DomainError("data do not approach a multiple of pi at the outer radius")
    u = np.concatenate([[0.0], p0 / r])
    ut = np.concatenate([[0.0], p1 / r])
    state = SimState(int(k), grid, u, ut, 0.0, float(cfl), frozen=u[-2:].copy())
    if horizon is not None:
        acc = _acceleration(u, int(k), state.h, state.radii, _parity(int(k)))
        live = (np.abs(ut[1:]) > support_tol) | (np.abs(acc[1:]) > support_tol)
        live[-2:] = False
        support = float(r[live][-1]) if live.any() else 0.0
        need = support + abs(horizon) + 2.0
        if grid.r_max < need:
            raise ConfigurationError(f"outer radius {grid.r_max:g} too small; causality needs R_max >= {need:.4g}")
        state = replace(state, budget=grid.r_max - support - 2.0)
    return state


def two_bubble_state(k: int, lam: float, mu: float, grid: RadialGrid, iota: int = 1, velocity=None,
                     cfl: float = 0.5, horizon: float | None = None) -> SimState:
    """Initial data ``iota (Q_lam - Q_mu)`` with an optional velocity profile (callable or array)."""
    _check_uniform(grid)
    if lam < 10.0 * grid.nodes[0]:
        raise ConfigurationError(f"inner scale {lam:g} needs grid spacing <= {lam / 10:g}")
    if not 0.0 < lam < mu:
        raise DomainError("need 0 < lam < mu")
    psi0 = two_bubble(grid.nodes, k, lam, mu, iota)
    return init_state(psi0, velocity, k, grid, cfl, horizon)


def psi_of_u(state: SimState) -> FieldPair:
    return state.field_pair()


def u_of_psi(fp: FieldPair, cfl: float = 0.5) -> SimState:
    """Evolution state for a field pair given on a uniform grid."""
    return init_state(fp.psi, fp.psit, fp.k, fp.grid, cfl)


def step(state: SimState, dt: float | None = None) -> SimState:
    """One RK4 step (``dt`` defaults to ``state.dt``; negative values go backwards)."""
    h = state.h
    dt = state.dt if dt is None else dt
    if abs(dt) > state.dt * (1 + 1e-9):
        raise ConfigurationError(f"time step exceeds the stable ratio {state.dt / h:.3g}")
    r = state.radii
    k, par = state.k, _parity(state.k)

    def rhs(u, v):
        return v, _acceleration(u, k, h, r, par)

    u, v = state.u, state.ut
    k1u, k1v = rhs(u, v)
    k2u, k2v = rhs(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v)
    k3u, k3v = rhs(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v)
    k4u, k4v = rhs(u + dt * k3u, v + dt * k3v)
    un = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    vn = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    un[0], vn[0] = 0.0, 0.0
    un[-2:], vn[-2:] = state.frozen, 0.0
    return replace(state, u=un, ut=vn, t=state.t + dt)


@dataclass
class Trajectory:
    """Snapshots and per-step diagnostics of one run."""

    k: int
    grid: RadialGrid
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diag_t: list = field(default_factory=list)
    diag_energy: list = field(default_factory=list)
    diag_kinetic: list = field(default_factory=list)
    halt_reason: str | None = None
    final: SimState | None = None
    params: dict = field(default_factory=dict)

    @property
    def energy_drift(self) -> float:
        e = np.asarray(self.diag_energy)
        return float(np.max(np.abs(e - e[0])) / abs(e[0])) if e.size else 0.0

    def write(self, directory, d_values: dict | None = None) -> Path:
        """Trajectory record (``trajectory.json``), grid, diagnostics CSV and one ``r psi psi_t`` file per snapshot.

        ``d_values`` maps snapshot times to proximity values for the ``d``
        column; other diagnostic rows get ``nan``.
        """
        from .io import write_csv, write_manifest

        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for i, (t, fp) in enumerate(zip(self.times, self.snapshots)):
            name = f"snapshot_{i:04d}.txt"
            body = np.column_stack([fp.grid.nodes, fp.psi, fp.psit])
            np.savetxt(out / name, body, fmt="%.17g", header=f"t={t:.17g}\nr psi psi_t")
            files.append(name)
        (out / "grid.txt").write_text(self.grid.to_text())
        d_values = d_values or {}
        d_t = np.array(list(d_values.keys()), dtype=float)
        d_v = list(d_values.values())

        def lookup(t: float) -> float:
            if d_t.size:
                i = int(np.argmin(np.abs(d_t - t)))
                if abs(d_t[i] - t) <= 1e-9 * max(1.0, abs(t)):
                    return float(d_v[i])
            return math.nan

        rows = [[t, e, kin, lookup(t)] for t, e, kin in zip(self.diag_t, self.diag_energy, self.diag_kinetic)]
        write_csv(out / "diagnostics.csv", ["t", "energy", "kinetic", "d"], rows)
        write_manifest(out / "trajectory.json", {
            "kind": "trajectory", "k": self.k, "grid": self.grid.params, "params": self.params,
            "halt_reason": self.halt_reason, "energy_drift": self.energy_drift,
            "grid_file": "grid.txt", "snapshots": [{"t": t, "file": f} for t, f in zip(self.times, files)],
        })
        return out


def evolve(state: SimState, T: float, snapshot_every: float | None = None, diag_every: int = 1,
           max_drift: float = DRIFT_HALT) -> Trajectory:
    """Integrate to ``state.t + T`` (backwards when ``T < 0``), recording snapshots.

    The run halts early, with ``halt_reason`` set, if ``sup |u|`` exceeds
    ``1e6`` or the relative energy drift exceeds ``max_drift``.
    """
    h = state.h
    truncated = None
    if state.budget is not None and abs(state.t + T) > state.budget:
        T_new = math.copysign(state.budget, T) - state.t
        truncated = f"causality horizon reached at t={state.t + T_new:.6g}"
        warnings.warn(f"{truncated}; run shortened from T={T:g}", AccuracyWarning, stacklevel=2)
        T = T_new
    nominal = state.dt
    nsteps = max(1, int(math.ceil(abs(T) / nominal - 1e-9)))
    dt = T / nsteps
    snap_steps = nsteps if snapshot_every is None else max(1, int(round(abs(snapshot_every) / abs(dt))))
    traj = Trajectory(state.k, state.grid, params={"T": T, "dt": dt, "h": h, "cfl": state.cfl})

    def record_diag(s: SimState) -> float:
        fp = s.field_pair()
        e = energy(fp)
        traj.diag_t.append(s.t)
        traj.diag_energy.append(e)
        traj.diag_kinetic.append(l2_norm_sq(fp.psit, fp.grid))
        return e

    e0 = record_diag(state)
    traj.times.append(state.t)
    traj.snapshots.append(state.field_pair())
    cur = state
    for n in range(1, nsteps + 1):
        nxt = step(cur, dt)
        if not np.all(np.isfinite(nxt.u)) or np.max(np.abs(nxt.u)) > BLOWUP_SUP:
            # keep the last valid state
            traj.halt_reason = f"blow-up suspected: sup |u| exceeded {BLOWUP_SUP:g} at t={nxt.t:.6g}"
            break
        cur = nxt
        if n % diag_every == 0 or n % snap_steps == 0 or n == nsteps:
            e = record_diag(cur)
            if abs(e - e0) > max_drift * abs(e0):
                traj.halt_reason = f"under-resolved concentration: energy drift above {max_drift:g} at t={cur.t:.6g}"
                break
        if n % snap_steps == 0 or n == nsteps:
            traj.times.append(cur.t)
            traj.snapshots.append(cur.field_pair())
    traj.final = cur
    if truncated and traj.halt_reason is None:
        traj.halt_reason = truncated
    return traj


def load_trajectory(directory) -> tuple[list[float], list[FieldPair], dict]:
    """Read back the snapshots written by :meth:`Trajectory.write`."""
    import json

    d = Path(directory)
    manifest = json.loads((d / "trajectory.json").read_text())
    grid = RadialGrid.from_text((d / manifest.get("grid_file", "grid.txt")).read_text())
    k = int(manifest["k"])
    times, snaps = [], []
    for entry in manifest["snapshots"]:
        data = np.loadtxt(d / entry["file"], ndmin=2)
        if data.shape[0] != grid.n or not np.allclose(data[:, 0], grid.nodes, rtol=1e-14, atol=0.0):
            raise DomainError(f"{entry['file']} does not match the stored grid")
        times.append(float(entry["t"]))
        snaps.append(FieldPair.infer(grid, data[:, 1], data[:, 2], k, class_tol=math.inf))
    return times, snaps, manifest


def evolution_grid(r_max: float, h: float) -> RadialGrid:
    """Uniform grid with spacing ``h`` reaching ``r_max``."""
    return uniform_grid(r_max, int(round(r_max / h)))
