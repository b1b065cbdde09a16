"""Harmonic-map bubble, its scaling derivatives, cutoffs and static operators.

Throughout, ``k >= 2`` is the equivariance class and the bubble is
``Q(r) = 2 arctan(r^k)``.  Scaling conventions:

* ``f_lam(r) = f(r / lam)`` preserves the energy norm (``H``-type);
* ``f_lam_(r) = f(r / lam) / lam`` preserves ``L^2(r dr)`` ("underlined").

All closed forms are written in terms of ``t = min(s, 1/s)`` with
``s = (r / lam)^k`` so that very large or very small radii never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, ConstructionError, DomainError, ResolutionError
from .grid import RadialGrid, geometric_grid

ORDERS = ("Q", "LQ", "L2Q", "L3Q", "L0LQ", "dQ", "ddQ")


def _check_k(k: int) -> int:
    if int(k) != k or k < 2:
        raise DomainError(f"equivariance class must be an integer >= 2, got {k}")
    return int(k)


def _sin_cos(r: np.ndarray, k: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """``sin Q`` and ``cos Q`` at ``r / lam``, computed without overflow."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise DomainError("radii must be non-negative")
    if not lam > 0.0:
        raise DomainError("scale must be positive")
    with np.errstate(divide="ignore", over="ignore"):
        logs = k * (np.log(r) - math.log(lam))
    t = np.exp(-np.abs(logs))
    sin_q = 2.0 * t / (1.0 + t * t)
    cos_q = np.sign(-logs) * (1.0 - t * t) / (1.0 + t * t)
    cos_q = np.where(logs == 0.0, 0.0, cos_q)
    return sin_q, cos_q


def Q(r, k: int, lam: float = 1.0) -> np.ndarray:
    """The bubble ``2 arctan((r / lam)^k)``."""
    k = _check_k(k)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        logs = k * (np.log(r) - math.log(lam))
    t = np.exp(-np.abs(logs))
    small = 2.0 * np.arctan(t)
    return np.where(logs <= 0.0, small, math.pi - small)


def LQ(r, k: int, lam: float = 1.0) -> np.ndarray:
    """``r Q'(r)`` at scale ``lam``; equals ``k sin Q``."""
    k = _check_k(k)
    sin_q, _ = _sin_cos(r, k, lam)
    return k * sin_q


def L2Q(r, k: int, lam: float = 1.0) -> np.ndarray:
    """``(r d/dr)^2 Q = (k^2 / 2) sin 2Q``."""
    k = _check_k(k)
    sin_q, cos_q = _sin_cos(r, k, lam)
    return k * k * sin_q * cos_q


def L3Q(r, k: int, lam: float = 1.0) -> np.ndarray:
    """``(r d/dr)^3 Q = k^3 cos 2Q sin Q``."""
    k = _check_k(k)
    sin_q, _ = _sin_cos(r, k, lam)
    return k**3 * (1.0 - 2.0 * sin_q**2) * sin_q


def L0LQ(r, k: int, lam: float = 1.0) -> np.ndarray:
    """``(1 + r d/dr) r Q' = 2 r Q' + r^2 Q''``, i.e. ``LQ + L2Q``."""
    return LQ(r, k, lam) + L2Q(r, k, lam)


def dQ(r, k: int, lam: float = 1.0) -> np.ndarray:
    """Radial derivative of ``Q(r / lam)``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = LQ(r, k, lam) / r
    return np.where(r == 0.0, 0.0, out)


def ddQ(r, k: int, lam: float = 1.0) -> np.ndarray:
    """Second radial derivative of ``Q(r / lam)``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (L2Q(r, k, lam) - LQ(r, k, lam)) / r**2
    return np.where(r == 0.0, 0.0, out)


_ORDER_FUN = {"Q": Q, "LQ": LQ, "L2Q": L2Q, "L3Q": L3Q, "L0LQ": L0LQ, "dQ": dQ, "ddQ": ddQ}


def bubble(k: int, order: str = "Q", lam: float = 1.0, underline: bool = False):
    """Return ``r -> (order)(r)`` for the bubble at scale ``lam``.

    ``order`` is one of ``Q, LQ, L2Q, L3Q, L0LQ, dQ, ddQ``.  With
    ``underline=True`` the result carries the extra ``1 / lam`` of the
    ``L^2``-preserving rescaling.
    """
    k = _check_k(k)
    if order not in _ORDER_FUN:
        raise ConfigurationError(f"unknown order {order!r}; use one of {ORDERS}")
    if not lam > 0.0:
        raise DomainError("scale must be positive")
    fun = _ORDER_FUN[order]
    factor = 1.0 / lam if underline else 1.0

    def evaluate(r):
        return factor * fun(r, k, lam)

    return evaluate


def two_bubble(r, k: int, lam: float, mu: float, sign: int = 1) -> np.ndarray:
    """``sign * (Q_lam - Q_mu)`` evaluated without cancellation in the tails."""
    k = _check_k(k)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        la = k * (np.log(r) - math.log(lam))
        lb = k * (np.log(r) - math.log(mu))
    # arctan a - arctan b = arctan((a - b) / (1 + a b)) for a, b > 0
    big = (la + lb) > 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        num_small = np.exp(la) - np.exp(lb)
        den_small = 1.0 + np.exp(la + lb)
        num_big = np.exp(-lb) - np.exp(-la)
        den_big = np.exp(-la - lb) + 1.0
    ratio = np.where(big, num_big / den_big, num_small / den_small)
    ratio = np.where(np.isfinite(ratio), ratio, 0.0)
    return sign * 2.0 * np.arctan(ratio)


def kappa(k: int) -> float:
    """Closed form of ``||LQ||^2`` in ``L^2(r dr)``: ``2 pi / sin(pi / k)``."""
    k = _check_k(k)
    return 2.0 * math.pi / math.sin(math.pi / k)


def bubble_energy(k: int) -> float:
    """Energy of the bubble, ``4 pi k``."""
    return 4.0 * math.pi * _check_k(k)


# ------------------------------------------------------------------ cutoffs
def _bump(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)


def smooth_cutoff(y) -> np.ndarray:
    """``C^infinity`` step: 1 for ``y <= 1``, 0 for ``y >= 2``."""
    y = np.asarray(y, dtype=float)
    a, b = _bump(2.0 - y), _bump(y - 1.0)
    return a / (a + b)


def smooth_cutoff_prime(y) -> np.ndarray:
    """Derivative of :func:`smooth_cutoff`."""
    y = np.asarray(y, dtype=float)
    inside = (y > 1.0) & (y < 2.0)
    u = np.where(inside, 2.0 - y, 1.0)
    v = np.where(inside, y - 1.0, 1.0)
    a, b = _bump(u), _bump(v)
    da = -a / u**2  # d/dy of exp(-1/u) with u = 2 - y
    db = b / v**2
    out = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return np.where(inside, out, 0.0)


@lru_cache(maxsize=64)
def _reference_grid(k: int) -> RadialGrid:
    return geometric_grid(1e-8, 1e8, 200)


@dataclass(frozen=True)
class CutoffZ:
    """Localised kernel element ``Z = chi(r / B) * LQ``.

    Used for the orthogonality conditions of the modulation fit.  ``beta`` is
    the pairing with ``LQ``; it sits within one percent of ``kappa`` for the
    default ``B = 10`` and every ``k >= 2``.
    """

    k: int
    B: float = 10.0

    def __post_init__(self) -> None:
        _check_k(self.k)
        if not self.B > 0.0:
            raise ConfigurationError("cutoff radius must be positive")

    def values(self, r, lam: float = 1.0, underline: bool = True) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = smooth_cutoff(r / (lam * self.B)) * LQ(r, self.k, lam)
        return out / lam if underline else out

    def lambda0_values(self, r, lam: float = 1.0, underline: bool = True) -> np.ndarray:
        """``(1 + r d/dr) Z`` at scale ``lam``."""
        r = np.asarray(r, dtype=float)
        y = r / (lam * self.B)
        chi, dchi = smooth_cutoff(y), smooth_cutoff_prime(y)
        lq, l2q = LQ(r, self.k, lam), L2Q(r, self.k, lam)
        out = chi * lq + y * dchi * lq + chi * l2q
        return out / lam if underline else out

    @property
    def beta(self) -> float:
        return _beta(self.k, float(self.B))


@lru_cache(maxsize=64)
def _beta(k: int, B: float) -> float:
    g = _reference_grid(k)
    z = CutoffZ(k, B)
    return g.integrate(z.values(g.nodes) * LQ(g.nodes, k), "r")


# ----------------------------------------------------- virial profile q(r)
def _smoothstep(y):
    y = np.clip(y, 0.0, 1.0)
    return y**3 * (10.0 - 15.0 * y + 6.0 * y * y)


def _smoothstep_d(y, order: int):
    inside = (y > 0.0) & (y < 1.0)
    yc = np.clip(y, 0.0, 1.0)
    if order == 1:
        val = 30.0 * yc**2 * (1.0 - yc) ** 2
    elif order == 2:
        val = 60.0 * yc * (2.0 * yc - 1.0) * (yc - 1.0)
    else:
        val = 360.0 * yc**2 - 360.0 * yc + 60.0
    return np.where(inside, val, 0.0)


def _profile_constants(L: float, n: int = 20001) -> dict:
    y = np.linspace(-0.05, 1.05, n)
    p = 1.0 - _smoothstep(y)
    p1 = -_smoothstep_d(y, 1) / L
    p2 = -_smoothstep_d(y, 2) / L**2
    p3 = -_smoothstep_d(y, 3) / L**3
    qpp = p + p1
    return {
        "P3_qp_over_r": float(np.max(np.abs(p))),
        "P3_qpp": float(np.max(np.abs(qpp))),
        "P4_qpp_lower": float(max(0.0, -np.min(qpp))),
        "P4_qp_over_r_lower": float(max(0.0, -np.min(p))),
        "P5_bilaplacian": float(max(0.0, np.max(2.0 * p2 + p3))),
        "P6_log_derivative": float(np.max(np.abs(p1))),
    }


@dataclass(frozen=True)
class VirialProfile:
    """Radial virial weight ``q`` with ``q' = r p(r)``.

    ``p`` equals 1 up to ``R``, then decreases to 0 along a quintic
    smoothstep in ``log r`` ending at ``R_tilde = R exp(L)``.  The width
    ``L`` is the smallest value meeting every bound with constant ``c``; it
    grows like ``1 / c``.
    """

    c: float
    R: float
    rtilde_cap: float = 1e30
    c0: float | None = None
    k: int | None = None
    constants: dict = field(init=False, repr=False)
    L: float = field(init=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.c < 1.0):
            raise ConfigurationError("c must lie in (0, 1)")
        if not self.R > 0.0:
            raise ConfigurationError("R must be positive")

        def meets(L):
            cs = _profile_constants(L, 2001)
            return (cs["P4_qpp_lower"] <= self.c and cs["P5_bilaplacian"] <= self.c
                    and cs["P6_log_derivative"] <= self.c)

        lo, hi = 1e-3, 1e6
        if not meets(hi):
            raise ConstructionError("no transition width meets the bounds")
        for _ in range(80):
            mid = math.sqrt(lo * hi)
            lo, hi = (lo, mid) if meets(mid) else (mid, hi)
        L = hi * 1.01
        if math.log(self.R) + L > math.log(self.rtilde_cap):
            best = 1.875 / (math.log(self.rtilde_cap) - math.log(self.R))
            raise ConstructionError(
                f"c={self.c} needs R_tilde={self.R:.3g}*exp({L:.3g}) beyond the cap {self.rtilde_cap:g}; "
                f"the cap allows roughly c >= {best:.3g}")
        cs = _profile_constants(L)
        if cs["P4_qpp_lower"] > self.c or cs["P5_bilaplacian"] > self.c or cs["P6_log_derivative"] > self.c:
            raise ConstructionError(f"achieved constants {cs} exceed c={self.c}")
        if self.c0 is not None:
            if self.k is None:
                raise ConfigurationError("a c0 target needs the class k")
            got = self.achieved_c0(self.k, L)
            if got > self.c0:
                raise ConstructionError(f"sup |(1 - p) LQ| = {got:.3g} exceeds c0={self.c0}; increase R")
            cs["c0"] = got
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "constants", cs)

    @property
    def R_tilde(self) -> float:
        return self.R * math.exp(self.L)

    def _y(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(r) - math.log(self.R)) / self.L

    def p(self, r) -> np.ndarray:
        return 1.0 - _smoothstep(self._y(r))

    def qp(self, r) -> np.ndarray:
        """``q'(r)``."""
        r = np.asarray(r, dtype=float)
        return r * self.p(r)

    def qpp(self, r) -> np.ndarray:
        """``q''(r) = p + r p'``."""
        y = self._y(r)
        return 1.0 - _smoothstep(y) - _smoothstep_d(y, 1) / self.L

    def q(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = 0.5 * r**2
        x_R, x_T = math.log(self.R), math.log(self.R_tilde)
        for i, ri in enumerate(r):
            if ri <= self.R:
                continue
            x_end = min(math.log(ri), x_T)
            # q' dr = r^2 p dx; integrate in unit-length pieces of log r
            edges = np.append(np.arange(x_R, x_end, 1.0), x_end)
            total = 0.5 * self.R**2
            for a, b in zip(edges[:-1], edges[1:]):
                total += integrate.quad(lambda x: math.exp(2 * x) * float(self.p(math.exp(x))), a, b,
                                        epsabs=0.0, epsrel=1e-12)[0]
            out[i] = total
        return out

    def achieved_c0(self, k: int, L: float | None = None) -> float:
        L = self.L if L is None else L
        x = np.linspace(math.log(self.R), math.log(self.R) + L, 4001)
        p = 1.0 - _smoothstep((x - math.log(self.R)) / L)
        return float(np.max((1.0 - p) * LQ(np.exp(x), k)))

    def to_table(self, n: int = 400) -> str:
        x = np.linspace(math.log(self.R) - 1.0, math.log(self.R_tilde) + 1.0, n)
        r = np.exp(x)
        head = " ".join(f"{k}={v:.6g}" for k, v in self.constants.items())
        lines = [f"# virial-profile c={self.c:.17g} R={self.R:.17g} R_tilde={self.R_tilde:.17g} {head}",
                 "r qp qpp"]
        lines += [f"{a:.17g} {b:.17g} {c:.17g}" for a, b, c in zip(r, self.qp(r), self.qpp(r))]
        return "\n".join(lines) + "\n"


def _check_support(profile: VirialProfile, lam: float, grid: RadialGrid) -> None:
    if np.count_nonzero(grid.nodes < profile.R_tilde * lam) < 32:
        raise ResolutionError("fewer than 32 nodes inside the support of the virial profile")


def apply_A(profile: VirialProfile, lam: float, g: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``q'(r / lam) d_r g``."""
    _check_support(profile, lam, grid)
    return profile.qp(grid.nodes / lam) * grid.d(g)


def apply_A0(profile: VirialProfile, lam: float, g: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Symmetrised operator ``(q''(r/lam)/(2 lam) + q'(r/lam)/(2 r)) g + q'(r/lam) d_r g``.

    It is antisymmetric in ``L^2(r dr)``: ``<g, A0 g> = 0`` for compactly
    supported ``g``.
    """
    _check_support(profile, lam, grid)
    r = grid.nodes
    y = r / lam
    qp = profile.qp(y)
    return (profile.qpp(y) / (2.0 * lam) + qp / (2.0 * r)) * g + qp * grid.d(g)


# ------------------------------------------------------- linearised operator
def linearized(k: int, lam: float, g: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``(-d_rr - r^-1 d_r + k^2 cos(2 Q_lam) / r^2) g``."""
    k = _check_k(k)
    r = grid.nodes
    sin_q, cos_q = _sin_cos(r, k, lam)
    cos2 = 1.0 - 2.0 * sin_q**2
    return -grid.dd(g) - grid.d(g) / r + k * k * cos2 * g / r**2


def factor_apply(k: int, lam: float, g: np.ndarray, grid: RadialGrid, adjoint: bool = False) -> np.ndarray:
    """First-order factor of the linearised operator, ``L = A* A``.

    ``A g = -g' + k cos(Q_lam) g / r`` annihilates ``LQ_lam``;
    ``A* g = g' + (1 + k cos Q_lam) g / r`` is its adjoint in ``L^2(r dr)``.
    """
    k = _check_k(k)
    r = grid.nodes
    _, cos_q = _sin_cos(r, k, lam)
    if adjoint:
        return grid.d(g) + (1.0 + k * cos_q) * g / r
    return -grid.d(g) + k * cos_q * g / r
