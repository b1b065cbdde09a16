"""Acceptance battery: one check function per criterion, shared by the test suite and ``wavemaps selftest``.

Every check returns a :class:`Check` with the measured numbers in ``detail``
so failures can be diagnosed without rerunning.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import asymptotics as asy
from .batteries import near_two_bubble, planted_field, random_field, smooth_compact
from .evolve import evolution_grid, evolve, init_state, two_bubble_state
from .functionals import FieldPair, bubble_distance, energy, h_norm, l2_norm_sq, norm_4d_sq, pair_norm
from .grid import geometric_grid
from .modulation import coercivity_quotient, fit_orthogonal, mod_matrix, modulate, sandwich
from .statics import LQ, Q, CutoffZ, bubble_energy, factor_apply, kappa, linearized, two_bubble
from .virial import omega, virial_residual

KS = (2, 3, 4, 5, 6)
SANDWICH_C = 10.0


@dataclass
class Check:
    number: int
    name: str
    passed: bool = False
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bits = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"[{status}] criterion {self.number:2d} {self.name} ({self.seconds:.1f} s): {bits}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def reference_grid():
    """Analysis grid used for statics: geometric on ``[1e-6, 1e6]`` with 200 nodes per decade."""
    return geometric_grid(1e-6, 1e6, 200)


def fit_grid():
    """Coarser grid used for the proximity and modulation fits."""
    return geometric_grid(1e-5, 1e5, 100)


def _timed(fn: Callable[[Check], None], number: int, name: str) -> Check:
    c = Check(number, name)
    t0 = time.perf_counter()
    fn(c)
    c.seconds = time.perf_counter() - t0
    return c


# ------------------------------------------------------------------ statics
def check_energy() -> Check:
    def run(c: Check):
        g = reference_grid()
        errs = [abs(energy(FieldPair(g, Q(g.nodes, k), None, k, 0, 1)) / bubble_energy(k) - 1.0) for k in KS]
        c.detail = {"max_rel_err": max(errs)}
        c.passed = max(errs) <= 1e-8

    c = _timed(run, 1, "static energy 4 pi k")
    c.passed &= c.seconds < 1.0
    return c


def check_kappa() -> Check:
    def run(c: Check):
        errs = [abs(asy.kappa_numeric(k) / kappa(k) - 1.0) for k in KS]
        c.detail = {"max_rel_err": max(errs)}
        c.passed = max(errs) <= 1e-8

    return _timed(run, 2, "kappa identity")


def check_cubic_moment() -> Check:
    def run(c: Check):
        errs = [abs(asy.cubic_moment(k) / (2.0 * k * k) - 1.0) for k in KS]
        c.detail = {"max_rel_err": max(errs)}
        c.passed = max(errs) <= 1e-8

    return _timed(run, 3, "cubic moment 2k^2")


# ------------------------------------------------------------- interactions
def check_interaction() -> Check:
    """Slope over ``[1e-3, 1e-1]`` and the shrink order of the relative deviation.

    The remainder is evaluated in cancellation-free form, so the order is
    measured at ``sigma = 0.01, 0.005`` for every ``k``.
    """
    def run(c: Check):
        ss = np.logspace(-3, -1, 9)
        slopes, orders = [], []
        for k in KS:
            slopes.append(asy.loglog_slope(ss, [asy.interaction_integral(k, s) for s in ss]) - k)
            s1, s2 = 0.01, 0.005
            d1 = asy.interaction_remainder(k, s1) / asy.interaction_prediction(k, s1)
            d2 = asy.interaction_remainder(k, s2) / asy.interaction_prediction(k, s2)
            orders.append(math.log(abs(d1 / d2)) / math.log(s1 / s2) - (2 * k - 0.5))
        c.detail = {"max_slope_dev": max(map(abs, slopes)), "order_margin_min": min(orders)}
        c.passed = max(map(abs, slopes)) <= 0.01 and min(orders) >= 0.0

    return _timed(run, 4, "interaction leading order")


def check_bprime() -> Check:
    def run(c: Check):
        devs, slopes = [], []
        ss = np.logspace(-4, -2, 7)
        for k in (2, 3, 4):
            devs.append(abs(asy.bprime_pairing(k, 1e-3) / asy.bprime_prediction(k, 1e-3) - 1.0))
            slopes.append(asy.loglog_slope(ss, [asy.bprime_pairing(k, s) for s in ss]) - (k - 1))
        c.detail = {"max_rel_dev": max(devs), "max_slope_dev": max(map(abs, slopes))}
        c.passed = max(devs) <= 0.05 and max(map(abs, slopes)) <= 0.02

    return _timed(run, 5, "b' leading pairing")


def m_offdiag_slopes(k: int, B: float, sigmas) -> tuple[float, float, float]:
    """``(slope(|M12|) , slope(|M21|), max diagonal deviation from +-beta)`` at ``g = 0``."""
    Z = CutoffZ(k, B)
    m12, m21, dev = [], [], 0.0
    for s in sigmas:
        g = geometric_grid(s * 1e-5, 1e5, 200)
        M, _ = mod_matrix(FieldPair(g, two_bubble(g.nodes, k, s, 1.0), None, k), s, 1.0, Z)
        m12.append(M[0, 1])
        m21.append(M[1, 0])
        dev = max(dev, abs(M[0, 0] - Z.beta) / Z.beta, abs(M[1, 1] + Z.beta) / Z.beta)
    return asy.loglog_slope(sigmas, m12), asy.loglog_slope(sigmas, m21), dev


def check_mmatrix(B: float = 5.0) -> Check:
    """Run with ``B = 5`` so that ``supp Z_lam_`` stays inside ``r <= mu`` on the whole ladder."""
    def run(c: Check):
        ss = np.logspace(-3, -1, 9)
        ok, s12, s21, dev = True, [], [], 0.0
        for k in (2, 3, 4):
            a, b, d = m_offdiag_slopes(k, B, ss)
            s12.append(a - k)
            s21.append(b - k)
            dev = max(dev, d)
            ok &= (k + 0.9 <= a <= k + 1.3) and abs(b - (k - 1)) <= 0.1
        c.detail = {"B": B, "diag_rel_dev": dev, "slope12_minus_k": s12, "slope21_minus_k": s21}
        c.passed = ok and dev <= 1e-8

    return _timed(run, 6, "M-matrix structure")


def check_kernel(n_random: int = 20, seed: int = 7) -> Check:
    def run(c: Check):
        g = reference_grid()
        r = g.nodes
        a_err = l_err = 0.0
        for k in KS:
            lq = LQ(r, k)
            a_err = max(a_err, math.sqrt(l2_norm_sq(factor_apply(k, 1.0, lq, g), g)))
            l_err = max(l_err, math.sqrt(l2_norm_sq(linearized(k, 1.0, lq, g), g)))
        rng = np.random.default_rng(seed)
        fact = 0.0
        for _ in range(n_random):
            k = int(rng.integers(2, 7))
            f = random_field(g, rng, 1e-2, 1e2)
            lhs = g.integrate(linearized(k, 1.0, f, g) * f, "r")
            rhs = l2_norm_sq(factor_apply(k, 1.0, f, g), g)
            fact = max(fact, abs(lhs - rhs) / abs(rhs))
        c.detail = {"A_LQ": a_err, "L_LQ": l_err, "factorisation_rel": fact}
        c.passed = a_err <= 1e-6 and l_err <= 1e-4 and fact <= 1e-6

    return _timed(run, 7, "linearised kernel")


# ---------------------------------------------------------------- dynamics
VIRIAL_HS = (0.04, 0.02, 0.01)


def smooth_run(k: int, h: float, T: float, snapshot_every: float, r_max: float = 12.0):
    grid = evolution_grid(r_max, h)
    r = grid.nodes
    state = init_state(smooth_compact(r, k, 0.6), smooth_compact(r, k, 0.4, 1.2), k, grid, horizon=T)
    return evolve(state, T, snapshot_every=snapshot_every, diag_every=5)


def check_virial(k: int = 2, R: float = 2.0, T: float = 2.0) -> Check:
    def run(c: Check):
        res = []
        for h in VIRIAL_HS:
            traj = smooth_run(k, h, T, snapshot_every=2.5 * h)
            res.append(virial_residual(traj, R).max_residual)
        orders = [math.log2(res[i] / res[i + 1]) for i in range(len(res) - 1)]
        g = reference_grid()
        om = max(abs(omega(FieldPair(g, Q(g.nodes, kk, lam), None, kk, 0, 1), R)) for kk in (2, 3) for lam in (0.1, 1.0))
        c.detail = {"residuals": res, "orders": orders, "omega_static": om}
        c.passed = res[-1] <= 1e-3 and min(orders) >= 2.0 and om <= 1e-10

    c = _timed(run, 8, "virial identity")
    c.passed &= c.seconds < 60.0
    return c


def check_evolution() -> Check:
    def run(c: Check):
        # static bubble
        h = 0.02
        worst_h = drift_q = 0.0
        for k in (2, 3):
            grid = evolution_grid(30.0, h)
            q = Q(grid.nodes, k)
            traj = evolve(init_state(q, None, k, grid), 2.0, snapshot_every=0.25, diag_every=10)
            worst_h = max(worst_h, max(h_norm(fp.psi - q, grid, k) for fp in traj.snapshots))
            drift_q = max(drift_q, traj.energy_drift)
        # smooth data: drift, self-convergence, norm identity
        runs = [smooth_run(2, hh, 1.0, snapshot_every=1.0) for hh in VIRIAL_HS]
        drift = runs[-1].energy_drift
        finals = [t.snapshots[-1].psi for t in runs]
        step = [1, 2, 4]
        coarse = [f[s - 1::s] for f, s in zip(finals, step)]
        e1 = np.max(np.abs(coarse[0] - coarse[1]))
        e2 = np.max(np.abs(coarse[1] - coarse[2]))
        order = math.log2(e1 / e2)
        fp = runs[-1].snapshots[-1]
        norm_gap = abs(norm_4d_sq(fp) / pair_norm(fp) ** 2 - 1.0)
        c.detail = {"sup_H_static": worst_h, "drift_static": drift_q, "drift_smooth": drift,
                    "self_conv_order": order, "norm_identity": norm_gap}
        c.passed = worst_h <= 1e-4 and max(drift, drift_q) <= 1e-6 and order >= 2.0 and norm_gap <= 1e-6

    return _timed(run, 9, "evolution fidelity")


def check_modulation(seed: int = 11) -> Check:
    def run(c: Check):
        g = fit_grid()
        rng = np.random.default_rng(seed)
        exact_err = pert_err = seed_err = 0.0
        worst_time = 0.0
        sandwich_ok, ratios = True, []
        for k in (2, 3):
            Z = CutoffZ(k)
            for lam, mu in ((0.01, 1.0), (0.03, 2.0)):
                sigma = lam / mu
                pure = FieldPair(g, two_bubble(g.nodes, k, lam, mu), None, k)
                f = fit_orthogonal(pure, Z, seed=(lam, mu), check_gate=False)
                exact_err = max(exact_err, abs(f.lam / lam - 1), abs(f.mu / mu - 1))
                f = fit_orthogonal(pure, Z, seed=(2 * lam, mu / 2), check_gate=False)
                seed_err = max(seed_err, abs(f.lam / lam - 1), abs(f.mu / mu - 1))
                fp, _ = planted_field(g, k, lam, mu, 0.01 * sigma ** (k / 2), rng, Z)
                t0 = time.perf_counter()
                f = fit_orthogonal(fp, Z)
                worst_time = max(worst_time, time.perf_counter() - t0)
                pert_err = max(pert_err, abs(f.lam / lam - 1), abs(f.mu / mu - 1))
                dp, mid, ratio = sandwich(fp, f)
                ratios.append(ratio)
                sandwich_ok &= dp <= mid * (1 + 1e-9) and mid <= SANDWICH_C * dp
        c.detail = {"exact_rel": exact_err, "seed_x2_rel": seed_err, "perturbed_rel": pert_err,
                    "sandwich_ratio_max": max(ratios), "max_fit_seconds": worst_time}
        c.passed = (exact_err <= 1e-12 and seed_err <= 1e-8 and pert_err <= 1e-4 and sandwich_ok
                    and worst_time < 10.0)

    return _timed(run, 10, "modulation recovery")


def check_ode() -> Check:
    def run(c: Check):
        tr = asy.integrate_ode(2, 1e-3, 0.0)
        rate_dev = abs(asy.rate_fit(tr).rate / asy.rate_prediction() - 1.0)
        exp_dev = 0.0
        mono = tr.xi_monotone()
        for k in (3, 4, 5, 6):
            z0 = 0.1
            tr = asy.integrate_ode(k, z0, asy.separatrix_b(k, z0), direction=-1)
            exp_dev = max(exp_dev, abs(asy.rate_fit(tr).rate / asy.exponent_prediction(k) - 1.0))
            for z, b in ((0.01, 0.0), (0.05, 0.5 * asy.separatrix_b(k, 0.05)), (0.02, -asy.separatrix_b(k, 0.02))):
                for direction in (1, -1):
                    mono &= asy.integrate_ode(k, z, b, direction=direction, horizon=1e6).xi_monotone()
        c.detail = {"k2_rate_rel": rate_dev, "power_exponent_rel": exp_dev, "xi_monotone": mono}
        c.passed = rate_dev <= 0.01 and exp_dev <= 0.01 and mono

    return _timed(run, 11, "reduced ODE rates")


EJECTION = {"k": 2, "lam": 0.05, "mu": 1.0, "h": 0.0025, "r_max": 25.0, "T": 1.0, "snap": 0.1}


def check_ejection(params: dict | None = None) -> Check:
    p = dict(EJECTION, **(params or {}))

    def run(c: Check):
        grid = evolution_grid(p["r_max"], p["h"])
        ok = True
        info = {}
        for direction in (1, -1):
            st = two_bubble_state(p["k"], p["lam"], p["mu"], grid, horizon=p["T"])
            traj = evolve(st, direction * p["T"], snapshot_every=p["snap"], diag_every=50)
            if traj.halt_reason:
                ok = False
            fits = [bubble_distance(fp, sign=1, scan=16) for fp in traj.snapshots]
            d = [f.d for f in fits]
            lam = [f.lam for f in fits]
            exceeded = next((abs(t) for t, dv in zip(traj.times, d) if dv > 2 * d[0]), math.nan)
            tail = np.diff(lam[-4:])
            ok &= math.isfinite(exceeded) and bool(np.all(tail > 0))
            info["t_exceed" + ("+" if direction > 0 else "-")] = exceeded
            info["lam_end" + ("+" if direction > 0 else "-")] = lam[-1]
        c.detail = info
        c.passed = ok

    c = _timed(run, 12, "ejection from two-bubble")
    c.passed &= c.seconds < 600.0
    return c


def check_exclusion(n: int = 50, seed: int = 3) -> Check:
    def run(c: Check):
        g = fit_grid()
        rng = np.random.default_rng(seed)
        worst, used, skipped = math.inf, 0, 0
        while used < n:
            fp = near_two_bubble(g, rng)
            if bubble_distance(fp, sign=1, scan=16).d > 0.01:
                skipped += 1
                continue
            used += 1
            worst = min(worst, bubble_distance(fp, sign=-1, scan=16).d)
        c.detail = {"fields": used, "discarded": skipped, "min_d_minus": worst}
        c.passed = worst >= 0.5

    return _timed(run, 13, "sign exclusion")


def check_coercivity() -> Check:
    def run(c: Check):
        vals, ok = {}, True
        for k in (2, 3):
            for s in (0.01, 0.03):
                a = coercivity_quotient(k, s, 1.0, per_decade=40)
                b = coercivity_quotient(k, s, 1.0, per_decade=80)
                vals[f"k{k}_s{s}"] = (a, b)
                ok &= a > 0 and b > 0 and abs(a / b - 1.0) <= 0.1
        c.detail = {key: list(v) for key, v in vals.items()}
        c.passed = ok

    return _timed(run, 14, "coercivity")


CHECKS: dict[int, Callable[[], Check]] = {
    1: check_energy, 2: check_kappa, 3: check_cubic_moment, 4: check_interaction, 5: check_bprime,
    6: check_mmatrix, 7: check_kernel, 8: check_virial, 9: check_evolution, 10: check_modulation,
    11: check_ode, 12: check_ejection, 13: check_exclusion, 14: check_coercivity,
}


def pde_ode_rate(sigma0: float = 0.02, h: float = 0.001, T: float = 1.0, r_max: float = 12.0,
                 snap: float = 0.1) -> asy.RateComparison:
    """Exponential rate of the modulated ``zeta(t)`` along an ejection against the reduced ODE."""
    k = 2
    grid = evolution_grid(r_max, h)
    traj = evolve(two_bubble_state(k, sigma0, 1.0, grid, horizon=T), T, snapshot_every=snap, diag_every=50)
    rows, seed = [], None
    for t, fp in zip(traj.times, traj.snapshots):
        row = modulate(fp, t, seed=seed, check_gate=seed is None)
        rows.append(row)
        seed = (row.lam, row.mu)
    t = [r.t for r in rows]
    return asy.compare_with_ode(t, [r.zeta for r in rows], rows[0].b, k, rows[0].mu)


def run(selected=None, report: Callable[[str], None] | None = None) -> list[Check]:
    out = []
    for n in sorted(selected or CHECKS):
        try:
            c = CHECKS[n]()
        except Exception as exc:  # a crash is a failed criterion, not an aborted battery
            c = Check(n, CHECKS[n].__name__, False, {"error": f"{type(exc).__name__}: {exc}"})
        out.append(c)
        if report:
            report(c.line())
    return out
