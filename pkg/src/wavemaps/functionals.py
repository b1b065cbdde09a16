"""Energies, norms and the two-bubble proximity functional.

A :class:`FieldPair` holds a state ``(psi, psi_t)`` sampled on a
:class:`~wavemaps.grid.RadialGrid`.  Its boundary class ``(m, n)`` records
``psi(0) = m pi`` and ``psi(inf) = n pi``.  The energy norm of a class-zero
field is

    ||f||_H^2 = int (f_r^2 + k^2 f^2 / r^2) r dr,

and all pairings drop the angular factor ``2 pi``; energies keep it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, FitError
from .grid import RadialGrid, monotone_cubic, quad
from .statics import bubble_energy, dQ, two_bubble


@dataclass(frozen=True, eq=False)
class FieldPair:
    """A wave-map state ``(psi, psi_t)`` on a grid, with its boundary class."""

    grid: RadialGrid
    psi: np.ndarray
    psit: np.ndarray
    k: int
    left_class: int = 0
    right_class: int = 0
    class_tol: float = 0.2

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=float)
        psit = np.zeros_like(psi) if self.psit is None else np.asarray(self.psit, dtype=float)
        if psi.shape != self.grid.nodes.shape or psit.shape != psi.shape:
            raise DomainError("field samples do not match the grid")
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(psit))):
            raise DomainError("field samples must be finite")
        if int(self.k) != self.k or self.k < 2:
            raise DomainError("equivariance class must be an integer >= 2")
        for end, cls in ((psi[0], self.left_class), (psi[-1], self.right_class)):
            if abs(end - cls * math.pi) > self.class_tol:
                raise DomainError(f"field end value {end:.4g} inconsistent with class {cls} pi")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "psit", psit)

    @classmethod
    def infer(cls, grid: RadialGrid, psi, psit, k: int, class_tol: float = 0.2) -> "FieldPair":
        """Build a pair with the boundary class read off the end samples."""
        psi = np.asarray(psi, dtype=float)
        return cls(grid, psi, psit, k, int(round(psi[0] / math.pi)), int(round(psi[-1] / math.pi)), class_tol)

    @property
    def psi_r(self) -> np.ndarray:
        return self.grid.d(self.psi)


# ----------------------------------------------------------------- energies
def energy_density(fp: FieldPair) -> np.ndarray:
    """Integrand (against ``r dr``) of the energy, including ``2 pi * 1/2``."""
    r = fp.grid.nodes
    return math.pi * (fp.psit**2 + fp.psi_r**2 + fp.k**2 * np.sin(fp.psi) ** 2 / r**2)


def energy(fp: FieldPair, a: float = 0.0, b: float = math.inf) -> float:
    """Energy on the annulus ``a <= r <= b`` (the whole line by default)."""
    if not 0.0 <= a < b:
        raise DomainError("need 0 <= a < b")
    dens = energy_density(fp)
    g = fp.grid
    start = 0.0 if g.from_origin else g.r_min
    if b == math.inf:
        total = quad(g, dens, "r").value
        return total if a <= start else total - g.partial(dens, start, min(a, g.r_max), "r")
    return g.partial(dens, max(a, start), min(b, g.r_max), "r")


def _abs_sin_antiderivative(x: float) -> float:
    # antiderivative of |sin| that is continuous and increasing
    n = math.floor(x / math.pi)
    return 2.0 * n + 1.0 - math.cos(x - n * math.pi)


def gfun(fp: FieldPair, R: float) -> float:
    """``2 pi k int_{psi(0)}^{psi(R)} |sin rho| d rho``, signed by orientation."""
    if R < 0.0:
        raise DomainError("R must be non-negative")
    start = fp.left_class * math.pi
    if R == 0.0:
        end = start
    elif R == math.inf or R >= fp.grid.r_max:
        end = fp.right_class * math.pi if R == math.inf else float(fp.psi[-1])
    elif R <= fp.grid.r_min:
        end = start + (fp.psi[0] - start) * (R / fp.grid.r_min) ** fp.k
    else:
        end = fp.grid.interpolate(fp.psi, R)
    return 2.0 * math.pi * fp.k * (_abs_sin_antiderivative(end) - _abs_sin_antiderivative(start))


def bogomolnyi_defect(fp: FieldPair) -> float:
    """``pi int (psi_r - k sin(psi) / r)^2 r dr``."""
    r = fp.grid.nodes
    return quad(fp.grid, math.pi * (fp.psi_r - fp.k * np.sin(fp.psi) / r) ** 2, "r").value


# -------------------------------------------------------------------- norms
def h_norm_sq(f: np.ndarray, grid: RadialGrid, k: int, df: np.ndarray | None = None) -> float:
    r = grid.nodes
    df = grid.d(f) if df is None else df
    return grid.integrate(df**2 + k * k * f**2 / r**2, "r")


def h_norm(f: np.ndarray, grid: RadialGrid, k: int) -> float:
    """Energy norm ``||f||_H`` of a class-zero radial profile."""
    return math.sqrt(max(h_norm_sq(f, grid, k), 0.0))


def l2_norm_sq(f: np.ndarray, grid: RadialGrid) -> float:
    return grid.integrate(np.asarray(f) ** 2, "r")


def pair_norm(fp: FieldPair) -> float:
    """``sqrt(||psi||_H^2 + ||psi_t||^2)``, defined for class ``(0, 0)`` only."""
    if fp.left_class != 0 or fp.right_class != 0:
        raise DomainError("the energy norm needs a class-zero field")
    return math.sqrt(h_norm_sq(fp.psi, fp.grid, fp.k) + l2_norm_sq(fp.psit, fp.grid))


def norm_4d_sq(fp: FieldPair) -> float:
    """Same norm computed from ``u = psi / r`` with the four-dimensional weight ``r^3 dr``."""
    g, k = fp.grid, fp.k
    r = g.nodes
    u, ut = fp.psi / r, fp.psit / r
    ur = g.d(u)
    return g.integrate((ur**2 + (k * k - 1) * u**2 / r**2 + ut**2) * r**3, "dr")


# ------------------------------------------------------- bisection scales
def bisection_scales(fp: FieldPair) -> tuple[float, float]:
    """Radii that split off one bubble's worth of energy from each end.

    ``lam`` has energy ``4 pi k / 2`` inside it and ``mu`` the same amount
    outside it; the static part of the energy is used.
    """
    static = FieldPair(fp.grid, fp.psi, None, fp.k, fp.left_class, fp.right_class, fp.class_tol)
    g = fp.grid
    dens = energy_density(static)
    cum = g.cumulative(dens, "r")
    total = quad(g, dens, "r").value
    half = 0.5 * bubble_energy(fp.k)
    if total <= 2.0 * half * (1.0 + 1e-12):
        raise DomainError(f"energy {total:.6g} not above one bubble ({2 * half:.6g})")
    spline = CubicHermiteSpline(g.nodes, cum, dens * g.nodes)
    lo = g.nodes[0]
    lam = optimize.brentq(lambda x: float(spline(x)) - half, lo, g.r_max, xtol=1e-14, rtol=1e-13)
    target = total - half
    if target > cum[-1]:
        raise DomainError("outer bubble scale lies beyond the grid")
    mu = optimize.brentq(lambda x: float(spline(x)) - target, lo, g.r_max, xtol=1e-14, rtol=1e-13)
    return lam, mu


# ------------------------------------------------------------- proximity d
@dataclass(frozen=True)
class BubbleFit:
    """Minimiser of the two-bubble proximity functional for one orientation."""

    d: float
    iota: int
    lam: float
    mu: float
    g_H: float
    kinetic: float
    ratio_term: float
    n_starts: int
    converged: bool
    short_circuit: bool = False
    oracle_gap: float = math.nan
    evaluations: int = 0
    starts: tuple = field(default=(), repr=False)

    @property
    def value(self) -> float:
        return self.d

    def residual(self, fp: FieldPair) -> np.ndarray:
        """``psi - iota (Q_lam - Q_mu)`` on the field's grid."""
        return fp.psi - two_bubble(fp.grid.nodes, fp.k, self.lam, self.mu, self.iota)

    def to_record(self) -> dict:
        rec = {"iota": self.iota, "lambda": self.lam, "mu": self.mu, "value": self.d,
               "converged": self.converged, "evaluations": self.evaluations}
        rec.update((k, v) for k, v in asdict(self).items() if k not in ("starts", "d", "lam", "mu"))
        return rec


class _Objective:
    def __init__(self, fp: FieldPair, iota: int):
        self.fp, self.iota, self.k = fp, iota, fp.k
        g = fp.grid
        self.r = g.nodes
        self.wr = g.weights * g.nodes
        self.psi = fp.psi
        self.psi_r = fp.psi_r
        self.kinetic = l2_norm_sq(fp.psit, g)
        self.nfev = 0

    def parts(self, ell: float, m: float) -> tuple[float, float]:
        lam, mu = math.exp(ell), math.exp(m)
        k, r = self.k, self.r
        res = self.psi - two_bubble(r, k, lam, mu, self.iota)
        res_r = self.psi_r - self.iota * (dQ(r, k, lam) - dQ(r, k, mu))
        gh = float(np.dot(self.wr, res_r**2 + k * k * res**2 / r**2))
        with np.errstate(over="ignore"):
            ratio = math.exp(min(k * (ell - m), 700.0))
        return gh, ratio

    def __call__(self, x) -> float:
        self.nfev += 1
        gh, ratio = self.parts(x[0], x[1])
        return gh + self.kinetic + ratio


def _fit_one(fp: FieldPair, iota: int, box: tuple[float, float], n_starts: int, scan: int,
             seeds: list[tuple[float, float]]) -> BubbleFit:
    obj = _Objective(fp, iota)
    lo, hi = box
    axis = np.linspace(lo, hi, scan)
    vals = np.array([[obj((a, b)) for b in axis] for a in axis])
    order = np.argsort(vals, axis=None)
    picked: list[tuple[float, float]] = list(seeds)
    step = axis[1] - axis[0]
    for flat in order:
        i, j = np.unravel_index(flat, vals.shape)
        cand = (axis[i], axis[j])
        if all(max(abs(cand[0] - p[0]), abs(cand[1] - p[1])) > 1.5 * step for p in picked):
            picked.append(cand)
        if len(picked) >= n_starts:
            break
    best = None
    conv_any = False
    for x0 in picked[:max(n_starts, len(seeds))]:
        x0 = np.clip(np.asarray(x0, dtype=float), lo, hi)
        res = optimize.minimize(obj, x0, method="Nelder-Mead", bounds=[(lo, hi), (lo, hi)],
                                options={"xatol": 1e-7, "fatol": 1e-14, "maxfev": 4000,
                                         "initial_simplex": np.array([x0, x0 + [0.2, 0], x0 + [0, 0.2]])})
        conv_any |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise FitError("no finite objective value found")
    gh, ratio = obj.parts(*best.x)
    # optima pinned to the admissible box are not trusted
    edge = 1e-6 * (hi - lo)
    if np.any(best.x <= lo + edge) or np.any(best.x >= hi - edge):
        conv_any = False
    return BubbleFit(d=float(best.fun), iota=iota, lam=math.exp(best.x[0]), mu=math.exp(best.x[1]),
                     g_H=math.sqrt(max(gh, 0.0)), kinetic=obj.kinetic, ratio_term=ratio,
                     n_starts=len(picked), converged=conv_any, evaluations=obj.nfev, starts=tuple(map(tuple, picked)))


def scale_box(grid: RadialGrid) -> tuple[float, float]:
    """Admissible ``log`` scales: ``[10 r_min, r_max / 10]``."""
    lo = math.log(10.0 * grid.r_min)
    hi = math.log(grid.r_max / 10.0)
    if lo >= hi:
        raise DomainError("grid too narrow for any admissible scale")
    return lo, hi


def bubble_distance(fp: FieldPair, sign: int | None = None, n_starts: int = 5, scan: int = 24,
                    short_circuit: float = 100.0) -> BubbleFit:
    """Proximity to the two-bubble family.

    Minimises ``||psi - iota (Q_lam - Q_mu)||_H^2 + ||psi_t||^2 + (lam/mu)^k``
    over ``(log lam, log mu)`` by multistart Nelder-Mead, seeded by the
    bisection scales and the best points of a coarse scan.  With ``sign``
    given only that orientation is searched; otherwise the better one wins.
    The global infimum cannot be certified; compare against a brute-force
    scan when that matters.
    """
    if fp.left_class != 0 or fp.right_class != 0:
        raise DomainError("proximity is defined for class-zero fields")
    norm = pair_norm(fp)
    if norm > short_circuit:
        # lam = mu cancels the bubbles, so d <= ||.||^2 + 1
        return BubbleFit(d=norm**2 + 1.0, iota=sign or 1, lam=math.nan, mu=math.nan, g_H=norm,
                         kinetic=l2_norm_sq(fp.psit, fp.grid), ratio_term=1.0, n_starts=0,
                         converged=False, short_circuit=True)
    box = scale_box(fp.grid)
    seeds: list[tuple[float, float]] = []
    try:
        lam, mu = bisection_scales(fp)
        seeds.append((float(np.clip(math.log(lam), *box)), float(np.clip(math.log(mu), *box))))
    except (DomainError, ValueError):
        pass
    signs = (sign,) if sign is not None else (1, -1)
    fits = []
    for s in signs:
        if s not in (1, -1):
            raise DomainError("sign must be +1 or -1")
        oriented = seeds if s == 1 else [(b, a) for a, b in seeds]
        fits.append(_fit_one(fp, s, box, n_starts, scan, oriented))
    return min(fits, key=lambda f: f.d)
