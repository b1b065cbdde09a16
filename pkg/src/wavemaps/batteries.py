"""Reproducible test fields shared by the acceptance checks, the tests and the demos."""

from __future__ import annotations

import math

import numpy as np

from .functionals import FieldPair, h_norm, l2_norm_sq
from .grid import RadialGrid
from .statics import CutoffZ, two_bubble


def smooth_compact(r, k: int, amp: float = 0.6, width: float = 1.0, center: float = 0.0) -> np.ndarray:
    """``amp (r / width)^k exp(-((r - center) / width)^2)``: smooth, class zero, Gaussian tail."""
    r = np.asarray(r, dtype=float)
    return amp * (r / width) ** k * np.exp(-(((r - center) / width) ** 2))


def log_bump(r, center: float, width: float = 0.5) -> np.ndarray:
    """Bump in ``log r`` supported on ``|log(r / center)| < width * 3``; vanishes to all orders at the edges."""
    x = np.log(np.asarray(r, dtype=float) / center) / (3.0 * width)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def random_field(grid: RadialGrid, rng: np.random.Generator, lo: float, hi: float, n_bumps: int = 3) -> np.ndarray:
    """Sum of ``n_bumps`` log-bumps with random centres in ``[lo, hi]`` and random signed amplitudes."""
    r = grid.nodes
    f = np.zeros_like(r)
    for _ in range(n_bumps):
        c = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        f += rng.normal() * log_bump(r, c, rng.uniform(0.2, 0.6))
    return f


def orthogonalize(g: np.ndarray, grid: RadialGrid, Z: CutoffZ, lam: float, mu: float) -> np.ndarray:
    """Remove the span of ``Z_lam_`` and ``Z_mu_`` from ``g`` so that both pairings vanish."""
    r = grid.nodes
    basis = [Z.values(r, lam), Z.values(r, mu)]
    G = np.array([[grid.integrate(a * b, "r") for b in basis] for a in basis])
    rhs = np.array([grid.integrate(a * g, "r") for a in basis])
    c = np.linalg.solve(G, rhs)
    return g - c[0] * basis[0] - c[1] * basis[1]


def planted_field(grid: RadialGrid, k: int, lam: float, mu: float, size: float, rng: np.random.Generator,
                  Z: CutoffZ | None = None, kinetic: float = 0.0) -> tuple[FieldPair, np.ndarray]:
    """``Q_lam - Q_mu + g`` with ``g`` orthogonal to both kernel elements and ``||g||_H = size``."""
    Z = Z or CutoffZ(k)
    g = orthogonalize(random_field(grid, rng, 0.3 * lam, 3.0 * mu), grid, Z, lam, mu)
    n = h_norm(g, grid, k)
    g = g * (size / n) if n > 0 else g
    psit = None
    if kinetic > 0.0:
        v = random_field(grid, rng, 0.3 * lam, 3.0 * mu)
        psit = v * math.sqrt(kinetic / l2_norm_sq(v, grid))
    return FieldPair(grid, two_bubble(grid.nodes, k, lam, mu) + g, psit, k), g


def near_two_bubble(grid: RadialGrid, rng: np.random.Generator, ks=(2, 3, 4)) -> FieldPair:
    """One random field near the positive two-bubble family (not necessarily orthogonal)."""
    k = int(rng.choice(ks))
    sigma_max = min(0.05, 0.004 ** (1.0 / k))
    sigma = math.exp(rng.uniform(math.log(1e-3), math.log(sigma_max)))
    mu = math.exp(rng.uniform(math.log(0.5), math.log(2.0)))
    lam = sigma * mu
    g = random_field(grid, rng, 0.3 * lam, 3.0 * mu)
    g *= rng.uniform(0.0, 0.05) / max(h_norm(g, grid, k), 1e-300)
    v = random_field(grid, rng, 0.3 * lam, 3.0 * mu)
    v *= rng.uniform(0.0, 0.05) / math.sqrt(max(l2_norm_sq(v, grid), 1e-300))
    return FieldPair(grid, two_bubble(grid.nodes, k, lam, mu) + g, v, k)
