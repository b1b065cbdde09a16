"""Interaction integrals between two bubbles and the reduced modulation ODE.

With ``sigma = lam / mu`` the leading interaction terms are

* ``(4/k^2) int LQ_sigma (LQ)^3 dr/r  ~  16 k sigma^k``,
* ``<LQ_lam_ | r^-2 (f(Q_lam - Q_mu) - f(Q_lam) + f(Q_mu))>  ~  8 k^2 lam^(k-1) / mu^k``
  with ``f(rho) = (k^2/2) sin 2 rho``,

and the reduced dynamics for the corrected scale ``zeta`` and the virial
functional ``b`` (outer scale frozen) read

    zeta' = b / kappa,      b' = 8 k^2 zeta^(k-1) / mu^k.

This system conserves ``b^2 / (2 kappa) - 8 k zeta^k / mu^k``.  For ``k = 2``
solutions grow like ``exp(sqrt(16/pi) t / mu)``; for ``k > 2`` the zero-level
branch behaves like ``gamma |t|^(-2/(k-2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError, NumericalError
from .grid import RadialGrid, geometric_grid
from .statics import L2Q, LQ, _check_k, kappa


@lru_cache(maxsize=32)
def _grid_for(lo: float, hi: float, per_decade: int) -> RadialGrid:
    return geometric_grid(lo, hi, per_decade)


def _span(*scales: float, per_decade: int = 200) -> RadialGrid:
    lo = 10.0 ** math.floor(math.log10(min(scales)) - 8)
    hi = 10.0 ** math.ceil(math.log10(max(scales)) + 8)
    return _grid_for(lo, hi, per_decade)


def kappa_numeric(k: int) -> float:
    """``||LQ||^2`` by quadrature."""
    g = _span(1.0)
    return g.integrate(LQ(g.nodes, k) ** 2, "r")


def cubic_moment(k: int) -> float:
    """``int (LQ)^3 r^(k-1) dr``; equals ``2 k^2``."""
    g = _span(1.0)
    r = g.nodes
    return g.integrate(LQ(r, k) ** 3 * r ** (k - 1), "dr")


def interaction_integral(k: int, sigma: float) -> float:
    """``(4/k^2) int LQ_sigma (LQ)^3 dr / r`` (leading energy interaction)."""
    k = _check_k(k)
    if not 0.0 < sigma < 1.0:
        raise DomainError("sigma must lie in (0, 1)")
    g = _span(sigma, 1.0)
    r = g.nodes
    return 4.0 / k**2 * g.integrate(LQ(r, k, sigma) * LQ(r, k) ** 3, "dr/r")


def interaction_prediction(k: int, sigma: float) -> float:
    return 16.0 * k * sigma**k


def interaction_remainder(k: int, sigma: float) -> float:
    """``interaction_integral - 16 k sigma^k`` without cancellation.

    Since ``LQ_sigma - 2k (sigma/r)^k = -2k y^-k / (1 + y^2k)`` with
    ``y = r / sigma``, and ``int r^-k (LQ)^3 dr/r`` equals the cubic moment
    (substitute ``r -> 1/r``), the remainder is
    ``-(8/k) int (LQ)^3 y^-k / (1 + y^2k) dr/r``.
    """
    k = _check_k(k)
    g = _span(sigma, 1.0)
    r = g.nodes
    y = r / sigma
    # y^-k / (1 + y^2k), arranged to avoid overflow on either side of y = 1
    with np.errstate(over="ignore", divide="ignore"):
        w = np.where(y < 1.0, 1.0 / (y**k * (1.0 + y ** (2 * k))), y ** (-3 * k) / (1.0 + y ** (-2 * k)))
    return -8.0 / k * g.integrate(LQ(r, k) ** 3 * w, "dr/r")


def nonlinear_difference(r, k: int, lam: float, mu: float) -> np.ndarray:
    """``f(Q_lam - Q_mu) - f(Q_lam) + f(Q_mu)`` in a cancellation-free form.

    Uses ``-sin(2 Q_lam) (LQ_mu)^2 + sin(2 Q_mu) (LQ_lam)^2``.
    """
    s2l = 2.0 * L2Q(r, k, lam) / k**2
    s2m = 2.0 * L2Q(r, k, mu) / k**2
    return -s2l * LQ(r, k, mu) ** 2 + s2m * LQ(r, k, lam) ** 2


def bprime_pairing(k: int, lam: float, mu: float = 1.0) -> float:
    """``<LQ_lam_ | r^-2 (f(Q_lam - Q_mu) - f(Q_lam) + f(Q_mu))>``."""
    k = _check_k(k)
    if not 0.0 < lam < mu:
        raise DomainError("need 0 < lam < mu")
    g = _span(lam, mu)
    r = g.nodes
    return g.integrate(LQ(r, k, lam) / lam * nonlinear_difference(r, k, lam, mu), "dr/r")


def bprime_prediction(k: int, lam: float, mu: float = 1.0) -> float:
    return 8.0 * k * k * lam ** (k - 1) / mu**k


def cross_term(k: int, sigma: float) -> float:
    """``int LQ_sigma LQ dr / r``; of order ``sigma^k |log sigma|``."""
    k = _check_k(k)
    g = _span(sigma, 1.0)
    r = g.nodes
    return g.integrate(LQ(r, k, sigma) * LQ(r, k), "dr/r")


def cross_prediction(k: int, sigma: float) -> float:
    """Leading term ``4 k^2 sigma^k |log sigma|`` of the cross integral.

    On ``sigma << r << 1`` the integrand is ``(2k)^2 sigma^k / r``.
    """
    return 4.0 * k * k * sigma**k * abs(math.log(sigma))


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log |y|`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.abs(np.asarray(y, dtype=float))), 1)[0])


@dataclass(frozen=True)
class SummaryRow:
    k: int
    quantity: str
    computed: float
    predicted: float

    HEADER = ("k", "quantity", "computed", "predicted", "rel_dev")

    @property
    def rel_dev(self) -> float:
        """Relative deviation; absolute when the prediction is zero."""
        gap = abs(self.computed - self.predicted)
        return gap / abs(self.predicted) if self.predicted else gap

    def as_row(self) -> list:
        return [self.k, self.quantity, self.computed, self.predicted, self.rel_dev]


SIGMA_RANGE = (1e-4, 0.2)


def interaction_report(k: int, sigma: float) -> list[SummaryRow]:
    """Computed versus predicted values of every interaction quantity at one ``sigma`` in ``[1e-4, 0.2]``."""
    k = _check_k(k)
    if not SIGMA_RANGE[0] <= sigma <= SIGMA_RANGE[1]:
        raise DomainError(f"sigma must lie in [{SIGMA_RANGE[0]:g}, {SIGMA_RANGE[1]:g}]")
    return [
        SummaryRow(k, "kappa", kappa_numeric(k), kappa(k)),
        SummaryRow(k, "cubic_moment", cubic_moment(k), 2.0 * k * k),
        SummaryRow(k, f"interaction(sigma={sigma:g})", interaction_integral(k, sigma),
                   interaction_prediction(k, sigma)),
        SummaryRow(k, f"interaction_rel_remainder(sigma={sigma:g})",
                   interaction_remainder(k, sigma) / interaction_prediction(k, sigma), 0.0),
        SummaryRow(k, f"bprime_pairing(lam={sigma:g})", bprime_pairing(k, sigma), bprime_prediction(k, sigma)),
        SummaryRow(k, f"cross_term(sigma={sigma:g})", cross_term(k, sigma), cross_prediction(k, sigma)),
    ]


# ------------------------------------------------------------- reduced ODE
def kappa1(k: int) -> float:
    """Weight in ``xi = b + kappa1 zeta^(k/2)``."""
    return math.sqrt(k * kappa(k) / 2 ** (k - 1))


def b_bound(k: int, zeta: float) -> float:
    """Admissible size of ``b``: ``10 sqrt(kappa k) zeta^(k/2)``."""
    return 10.0 * math.sqrt(kappa(k) * k) * zeta ** (k / 2)


def separatrix_b(k: int, zeta: float, mu: float = 1.0) -> float:
    """Positive ``b`` on the zero level of the conserved quantity."""
    return math.sqrt(16.0 * k * kappa(k) * zeta**k / mu**k)


def exponent_prediction(k: int) -> float:
    """Power of ``|t|`` in ``zeta`` on the concentrating branch, ``-2/(k-2)``."""
    if k <= 2:
        raise DomainError("power-law regime needs k > 2")
    return -2.0 / (k - 2)


def gamma_prediction(k: int, mu: float = 1.0) -> float:
    """Prefactor ``gamma`` with ``gamma^(k-2) = kappa alpha (alpha+1) mu^k / (8 k^2)``."""
    alpha = -exponent_prediction(k)
    return (kappa(k) * alpha * (alpha + 1.0) * mu**k / (8.0 * k * k)) ** (1.0 / (k - 2))


def rate_prediction(k: int = 2, mu: float = 1.0) -> float:
    """Exponential rate for ``k = 2``: ``sqrt(8 k^2 / kappa) / mu = sqrt(16/pi) / mu``."""
    if k != 2:
        raise DomainError("exponential regime is k = 2")
    return math.sqrt(8.0 * k * k / kappa(k)) / mu


@dataclass(frozen=True)
class OdeTrajectory:
    k: int
    mu: float
    t: np.ndarray
    zeta: np.ndarray
    b: np.ndarray
    stop_reason: str

    @property
    def xi(self) -> np.ndarray:
        return self.b + kappa1(self.k) * self.zeta ** (self.k / 2)

    @property
    def xi_dot(self) -> np.ndarray:
        k = self.k
        zdot = self.b / kappa(k)
        bdot = 8.0 * k * k * self.zeta ** (k - 1) / self.mu**k
        return bdot + kappa1(k) * (k / 2) * self.zeta ** (k / 2 - 1) * zdot

    @property
    def direction(self) -> int:
        return 1 if self.t[-1] >= self.t[0] else -1

    def xi_monotone(self) -> bool:
        """``xi`` strictly increasing in forward time along the stored samples."""
        return bool(np.all(self.direction * np.diff(self.xi) > 0))

    @property
    def invariant(self) -> np.ndarray:
        return self.b**2 / (2 * kappa(self.k)) - 8.0 * self.k * self.zeta**self.k / self.mu**self.k

    def kappa2(self) -> float:
        """Largest constant with ``xi' >= kappa2 xi^((2k-2)/k)`` on the samples where ``xi > 0``."""
        xi = self.xi
        pos = xi > 0.0
        if not pos.any():
            return math.nan
        return float(np.min(self.xi_dot[pos] / xi[pos] ** ((2 * self.k - 2) / self.k)))


ZETA0_MAX = 0.2


def integrate_ode(k: int, zeta0: float, b0: float, mu: float = 1.0, direction: int = 1,
                  horizon: float = 1e12, zeta_stop: float = 0.5, zeta_floor: float | None = None,
                  rtol: float = 1e-13, check_pre: bool = True) -> OdeTrajectory:
    """Integrate the reduced system until ``zeta`` leaves ``(zeta_floor, zeta_stop)`` or ``|t|`` hits ``horizon``.

    The default floor is two decades below ``zeta0``.  Along the zero-level
    branch the relative error of the invariant is amplified like
    ``(zeta0 / zeta)^k`` in the concentrating direction, hence the tight
    default ``rtol``.
    """
    k = _check_k(k)
    if check_pre:
        if not 0.0 < zeta0 < ZETA0_MAX:
            raise DomainError(f"need 0 < zeta0 < {ZETA0_MAX}")
        if abs(b0) > b_bound(k, zeta0):
            raise DomainError(f"|b0| exceeds {b_bound(k, zeta0):.4g}")
    if not 0.0 < zeta0 < zeta_stop:
        raise DomainError("need 0 < zeta0 < zeta_stop")
    if not horizon > 0.0:
        raise ConfigurationError("horizon must be positive")
    if direction not in (1, -1):
        raise ConfigurationError("direction must be +1 or -1")
    kap = kappa(k)
    floor = zeta0 * 1e-2 if zeta_floor is None else zeta_floor

    def rhs(t, y):
        z = max(y[0], 0.0)
        return [y[1] / kap, 8.0 * k * k * z ** (k - 1) / mu**k]

    def hit_top(t, y):
        return y[0] - zeta_stop

    def hit_floor(t, y):
        return y[0] - floor

    hit_top.terminal = hit_floor.terminal = True
    # absolute tolerances well below the smallest values either component reaches
    atol = [1e-3 * rtol * floor, 1e-3 * rtol * separatrix_b(k, floor, mu)]
    sol = integrate.solve_ivp(rhs, (0.0, direction * horizon), [zeta0, b0], method="DOP853", rtol=rtol,
                              atol=atol, events=(hit_top, hit_floor))
    if sol.status == -1:
        raise NumericalError(f"integration failed: {sol.message}; last state t={sol.t[-1]:.17g} "
                             f"zeta={sol.y[0, -1]:.17g} b={sol.y[1, -1]:.17g}")
    if sol.t_events[0].size:
        reason = "zeta reached the upper limit"
    elif sol.t_events[1].size:
        reason = "zeta reached the floor"
    else:
        reason = "horizon reached"
    return OdeTrajectory(k, mu, sol.t, sol.y[0], sol.y[1], reason)


@dataclass(frozen=True)
class RateFit:
    model: str
    rate: float          # exponential rate, or the power of |t|
    prefactor: float     # amplitude (exponential) or gamma (power law)
    window: tuple
    residual: float      # rms of the least-squares fit in log coordinates


def _series(traj) -> tuple[np.ndarray, np.ndarray, np.ndarray | None, int]:
    if isinstance(traj, OdeTrajectory):
        return traj.t, traj.zeta, traj.b / kappa(traj.k), traj.k
    t, z, k = traj
    return np.asarray(t, dtype=float), np.asarray(z, dtype=float), None, int(k)


def rate_fit(traj, model: str = "auto", decades: float = 1.0, min_span: float = 2.0) -> RateFit:
    """Fit the growth or decay law of ``zeta`` over its last ``decades`` decades.

    ``traj`` is an :class:`OdeTrajectory` or a tuple ``(t, zeta, k)`` of
    samples (e.g. from the modulation pipeline).  Exponential: slope of
    ``log zeta`` in ``t``.  Power law: slope ``p`` of ``log |zeta'|`` against
    ``log zeta``; then ``zeta ~ gamma |t - t*|^(1/(1-p))`` independently of the
    unknown offset ``t*``.  The series must span ``min_span`` decades.
    """
    t, z, zdot, k = _series(traj)
    if model == "auto":
        model = "exponential" if k == 2 else "power"
    if np.any(z <= 0.0):
        raise DomainError("zeta must stay positive")
    if math.log10(z.max() / z.min()) < min_span - 1e-9:
        raise DomainError(f"series spans fewer than {min_span:g} decades in zeta")
    end = z[-1]
    sel = (z <= end * 10**decades) & (z >= end) if z[-1] < z[0] else (z >= end / 10**decades) & (z <= end)
    if sel.sum() < 5:
        raise DomainError("too few samples in the fit window")
    window = (float(z[sel].min()), float(z[sel].max()))
    if model == "exponential":
        (slope, icpt), res = _lsq(t[sel], np.log(z[sel]))
        return RateFit(model, float(abs(slope)), float(math.exp(icpt)), window, res)
    if model == "power":
        zd = np.abs(zdot[sel]) if zdot is not None else np.abs(np.gradient(z, t)[sel])
        (p, icpt), res = _lsq(np.log(z[sel]), np.log(zd))
        gamma = ((p - 1.0) * math.exp(icpt)) ** (-1.0 / (p - 1.0))
        return RateFit(model, float(1.0 / (1.0 - p)), float(gamma), window, res)
    raise ConfigurationError("model must be 'exponential', 'power' or 'auto'")


def _lsq(x: np.ndarray, y: np.ndarray):
    coef = np.polyfit(x, y, 1)
    return coef, float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))


@dataclass(frozen=True)
class RateComparison:
    pde_rate: float
    ode_rate: float
    t_window: tuple

    @property
    def rel_dev(self) -> float:
        return abs(self.pde_rate - self.ode_rate) / abs(self.ode_rate)


def compare_with_ode(t, zeta, b0: float, k: int = 2, mu: float = 1.0) -> RateComparison:
    """Exponential rate of a sampled ``zeta(t)`` against the reduced ODE started from ``(zeta(t0), b0)``.

    Both series are fitted by least squares in ``(t, log zeta)`` on the same
    sample times, so transients weigh equally on either side.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(zeta, dtype=float)
    if t.size < 3 or np.any(z <= 0.0):
        raise DomainError("need at least three positive samples")
    direction = 1 if t[-1] > t[0] else -1
    tau = np.abs(t - t[0])
    kap = kappa(k)
    sol = integrate.solve_ivp(lambda s, y: [y[1] / kap, 8.0 * k * k * max(y[0], 0.0) ** (k - 1) / mu**k],
                              (0.0, direction * tau[-1]), [float(z[0]), b0], method="DOP853", rtol=1e-13,
                              atol=1e-16, t_eval=direction * tau)
    if sol.status != 0:
        raise DomainError(f"reduced ODE failed: {sol.message}")
    z_ode = sol.y[0]
    pde = _lsq(t, np.log(z))[0][0]
    ode_rate = _lsq(t, np.log(z_ode))[0][0]
    return RateComparison(float(abs(pde)), float(abs(ode_rate)), (float(t.min()), float(t.max())))
