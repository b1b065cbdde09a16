"""Independent reference values for the test suite.

Nothing here calls the quadrature, fitting or Newton code under test.  Scalar
integrals use mpmath at high working precision; the proximity functional is
minimised by brute-force scanning; Jacobians by central differences.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def _lq(r, k, lam=1):
    x = (r / lam) ** k
    return 2 * k * x / (1 + x * x)


def _q(r, k, lam=1):
    return 2 * mp.atan((r / lam) ** k)


def kappa(k: int) -> float:
    """``int (LQ)^2 r dr`` by mpmath quadrature."""
    return float(mp.quad(lambda r: _lq(r, k) ** 2 * r, [0, 1, mp.inf]))


def cubic_moment(k: int) -> float:
    return float(mp.quad(lambda r: _lq(r, k) ** 3 * r ** (k - 1), [0, 1, mp.inf]))


def interaction(k: int, sigma: float) -> float:
    """``(4/k^2) int LQ_sigma (LQ)^3 dr/r``."""
    s = mp.mpf(sigma)
    val = mp.quad(lambda r: _lq(r, k, s) * _lq(r, k) ** 3 / r, [0, s, 1, mp.inf])
    return float(4 * val / k**2)


def bprime(k: int, lam: float, mu: float = 1.0) -> float:
    """Direct high-precision form of the b' pairing; the cancellation is absorbed by 40 digits."""
    lam, mu = mp.mpf(lam), mp.mpf(mu)

    def f(rho):
        return k * k / 2 * mp.sin(2 * rho)

    def integrand(r):
        ql, qm = _q(r, k, lam), _q(r, k, mu)
        diff = f(ql - qm) - f(ql) + f(qm)
        return _lq(r, k, lam) / lam * diff / r

    return float(mp.quad(integrand, [0, lam, mp.sqrt(lam * mu), mu, mp.inf]))


def cross_closed_form(k: int, sigma: float) -> float:
    """``int LQ_sigma LQ dr/r = 4 k^2 sigma^k log(1/sigma) / (1 - sigma^(2k))``.

    With ``s = r^k`` both factors are rational in ``s`` and partial fractions give
    the logarithm exactly.
    """
    return 4 * k * k * sigma**k * math.log(1 / sigma) / (1 - sigma ** (2 * k))


def cross_quad(k: int, sigma: float) -> float:
    s = mp.mpf(sigma)
    return float(mp.quad(lambda r: _lq(r, k, s) * _lq(r, k) / r, [0, s, 1, mp.inf]))


# ----------------------------------------------------------- proximity oracle
def _d_value(fp, iota, ell, m):
    from wavemaps.statics import dQ, two_bubble

    r, k, g = fp.grid.nodes, fp.k, fp.grid
    lam, mu = math.exp(ell), math.exp(m)
    res = fp.psi - two_bubble(r, k, lam, mu, iota)
    res_r = fp.psi_r - iota * (dQ(r, k, lam) - dQ(r, k, mu))
    gh = float(np.sum(g.weights * r * (res_r**2 + k * k * res**2 / r**2)))
    kin = float(np.sum(g.weights * r * fp.psit**2))
    return gh + kin + math.exp(k * (ell - m))


def brute_force_d(fp, iota: int = 1, n: int = 200, box=None, refinements: int = 2) -> tuple[float, float, float]:
    """Scan an ``n x n`` grid in ``(log lam, log mu)``, then zoom twice around the best cell.

    Returns ``(d, lam, mu)``.
    """
    if box is None:
        box = (math.log(10 * fp.grid.r_min), math.log(fp.grid.r_max / 10))
    lo_l, hi_l = box
    lo_m, hi_m = box
    best = (math.inf, 0.0, 0.0)
    for _ in range(refinements + 1):
        ls = np.linspace(lo_l, hi_l, n)
        ms = np.linspace(lo_m, hi_m, n)
        for a in ls:
            for b in ms:
                v = _d_value(fp, iota, a, b)
                if v < best[0]:
                    best = (v, a, b)
        dl, dm = 2 * (ls[1] - ls[0]), 2 * (ms[1] - ms[0])
        lo_l, hi_l = best[1] - dl, best[1] + dl
        lo_m, hi_m = best[2] - dm, best[2] + dm
        n = max(n // 4, 21)
    return best[0], math.exp(best[1]), math.exp(best[2])


def fd_jacobian(fun, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    J = np.zeros((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h)
    return J
