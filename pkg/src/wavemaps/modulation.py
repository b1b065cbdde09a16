"""Modulation parameters of a near two-bubble state.

Given ``psi`` close to ``Q_lam - Q_mu`` the scales are fixed by requiring the
remainder ``g = psi - Q_lam + Q_mu`` to be orthogonal (in ``L^2(r dr)``) to the
localised kernel elements ``Z_lam_`` and ``Z_mu_``.  The fit is a damped
Newton iteration in ``(log lam, log mu)`` on the normalised conditions

    F1 = <Z_lam_ | g> / lam,   F2 = <Z_mu_ | g> / mu,

whose Jacobian is available in closed form.  Derived quantities: the
velocity matrix ``M``, the refined virial functional ``b`` and the corrected
scale ``zeta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import AccuracyWarning, DomainError, FitError, NumericalError
from .functionals import FieldPair, bubble_distance, h_norm, l2_norm_sq
from .grid import RadialGrid
from .statics import LQ, Q, CutoffZ, VirialProfile, apply_A0, kappa, smooth_cutoff, two_bubble


@dataclass(frozen=True, eq=False)
class OrthogonalFit:
    """Result of :func:`fit_orthogonal`; ``g`` is the orthogonal remainder."""

    lam: float
    mu: float
    g: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    g_H: float
    kinetic: float

    @property
    def ratio(self) -> float:
        return self.lam / self.mu


def _pair(grid: RadialGrid, f: np.ndarray, g: np.ndarray) -> float:
    return grid.integrate(f * g, "r")


def _conditions(fp: FieldPair, Z: CutoffZ, ell: float, m: float):
    lam, mu = math.exp(ell), math.exp(m)
    r, grid = fp.grid.nodes, fp.grid
    g = fp.psi - two_bubble(r, fp.k, lam, mu)
    zl, zm = Z.values(r, lam), Z.values(r, mu)
    F = np.array([_pair(grid, zl, g) / lam, _pair(grid, zm, g) / mu])
    return F, g, zl, zm


def orthogonality_jacobian(fp: FieldPair, Z: CutoffZ, lam: float, mu: float) -> np.ndarray:
    """Derivative of ``(F1, F2)`` with respect to ``(log lam, log mu)``."""
    r, grid = fp.grid.nodes, fp.grid
    g = fp.psi - two_bubble(r, fp.k, lam, mu)
    zl, zm = Z.values(r, lam), Z.values(r, mu)
    lql, lqm = LQ(r, fp.k, lam) / lam, LQ(r, fp.k, mu) / mu
    z1l = Z.lambda0_values(r, lam) + zl
    z1m = Z.lambda0_values(r, mu) + zm
    return np.array([
        [_pair(grid, zl, lql) - _pair(grid, z1l, g) / lam, -(mu / lam) * _pair(grid, zl, lqm)],
        [(lam / mu) * _pair(grid, zm, lql), -_pair(grid, zm, lqm) - _pair(grid, z1m, g) / mu],
    ])


def fit_orthogonal(fp: FieldPair, Z: CutoffZ | None = None, seed: tuple[float, float] | None = None,
                   eta0: float = 0.01, check_gate: bool = True, max_iter: int = 50,
                   tol: float = 1e-13) -> OrthogonalFit:
    """Scales ``(lam, mu)`` making ``g`` orthogonal to ``Z_lam_`` and ``Z_mu_``.

    The state must lie within ``eta0`` of the positive two-bubble family,
    measured by the proximity functional; its minimiser seeds the iteration
    unless ``seed`` is given.
    """
    if fp.left_class != 0 or fp.right_class != 0:
        raise DomainError("modulation needs a class-zero field")
    Z = Z or CutoffZ(fp.k)
    if seed is None or check_gate:
        fit = bubble_distance(fp, sign=1)
        if check_gate and fit.d > eta0:
            raise DomainError(f"state is not near a two-bubble: d_+ = {fit.d:.3g} > {eta0}")
        seed = seed or (fit.lam, fit.mu)
    x = np.log(np.asarray(seed, dtype=float))
    F, g, _, _ = _conditions(fp, Z, *x)
    nF = float(np.max(np.abs(F)))
    history = [nF]
    for it in range(1, max_iter + 1):
        J = orthogonality_jacobian(fp, Z, *np.exp(x))
        try:
            dx = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise FitError("singular orthogonality Jacobian") from exc
        t = 1.0
        for _ in range(30):
            F_new, g_new, _, _ = _conditions(fp, Z, *(x + t * dx))
            n_new = float(np.max(np.abs(F_new)))
            if n_new < nF or n_new <= tol:
                break
            t *= 0.5
        else:
            if nF <= 10 * tol:
                break
            raise FitError(f"line search failed; residual history {_hist(history)}")
        x, F, g, nF = x + t * dx, F_new, g_new, n_new
        history.append(nF)
        if nF <= tol or np.max(np.abs(t * dx)) < 1e-15:
            break
    else:
        raise FitError(f"no convergence in {max_iter} iterations; residual history {_hist(history)}")
    lam, mu = np.exp(x)
    return OrthogonalFit(float(lam), float(mu), g, nF, it, h_norm(g, fp.grid, fp.k), l2_norm_sq(fp.psit, fp.grid))


def _hist(values) -> str:
    return ", ".join(f"{v:.3g}" for v in values[-8:])


def mod_matrix(fp: FieldPair, lam: float, mu: float, Z: CutoffZ | None = None,
               g: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Linear system ``M (lam', mu') = rhs`` obtained by differentiating orthogonality.

    With ``g`` the remainder, the diagonal entries are ``+-beta`` minus
    ``<(1 + r d/dr) Z | g>`` corrections; the right side pairs the kernel
    elements with ``psi_t``.
    """
    Z = Z or CutoffZ(fp.k)
    r, grid, k = fp.grid.nodes, fp.grid, fp.k
    g = fp.psi - two_bubble(r, k, lam, mu) if g is None else g
    zl, zm = Z.values(r, lam), Z.values(r, mu)
    lql, lqm = LQ(r, k, lam) / lam, LQ(r, k, mu) / mu
    M = np.array([
        [_pair(grid, zl, lql) - _pair(grid, Z.lambda0_values(r, lam), g) / lam, -_pair(grid, zl, lqm)],
        [_pair(grid, zm, lql), -_pair(grid, zm, lqm) - _pair(grid, Z.lambda0_values(r, mu), g) / mu],
    ])
    rhs = -np.array([_pair(grid, zl, fp.psit), _pair(grid, zm, fp.psit)])
    return M, rhs


def mod_velocities(fp: FieldPair, lam: float, mu: float, Z: CutoffZ | None = None,
                   g: np.ndarray | None = None, det_tol: float = 1e-8) -> tuple[float, float, float]:
    """``(lam', mu', cond(M))``.

    Raises :class:`NumericalError` when ``|det M|`` falls below ``det_tol``
    times the product of the diagonal scales, i.e. the scales are too close.
    """
    M, rhs = mod_matrix(fp, lam, mu, Z, g)
    scale = abs(M[0, 0] * M[1, 1]) + abs(M[0, 1] * M[1, 0])
    if not scale > 0.0 or abs(np.linalg.det(M)) < det_tol * scale:
        raise NumericalError(f"modulation matrix is singular (scales {lam:.3g}, {mu:.3g} insufficiently separated)")
    sol = np.linalg.solve(M, rhs)
    return float(sol[0]), float(sol[1]), float(np.linalg.cond(M))


def bfunc_parts(fp: FieldPair, lam: float, mu: float, profile: VirialProfile,
                g: np.ndarray | None = None) -> tuple[float, float]:
    """The two addends ``-<LQ_lam_ | psi_t>`` and ``-<psi_t | A0(lam) g>`` of ``b``."""
    r, grid, k = fp.grid.nodes, fp.grid, fp.k
    g = fp.psi - two_bubble(r, k, lam, mu) if g is None else g
    return -_pair(grid, LQ(r, k, lam) / lam, fp.psit), -_pair(grid, fp.psit, apply_A0(profile, lam, g, grid))


def bfunc(fp: FieldPair, lam: float, mu: float, profile: VirialProfile, g: np.ndarray | None = None) -> float:
    """``b = -<LQ_lam_ | psi_t> - <psi_t | A0(lam) g>``."""
    a, b = bfunc_parts(fp, lam, mu, profile, g)
    return a + b


def zeta(fp: FieldPair, lam: float, mu: float, g: np.ndarray | None = None) -> float:
    """Corrected scale ``lam - <chi_mu LQ_lam_ | g> / kappa``."""
    r, grid, k = fp.grid.nodes, fp.grid, fp.k
    g = fp.psi - two_bubble(r, k, lam, mu) if g is None else g
    weight = smooth_cutoff(r / mu) * LQ(r, k, lam) / lam
    return lam - _pair(grid, weight, g) / kappa(k)


def sandwich(fp: FieldPair, fit: OrthogonalFit, d_plus: float | None = None) -> tuple[float, float, float]:
    """``(d_+, ||(g, psi_t)||^2 + (lam/mu)^k, ratio)``; the left never exceeds the middle."""
    d_plus = bubble_distance(fp, sign=1).d if d_plus is None else d_plus
    mid = fit.g_H**2 + fit.kinetic + fit.ratio**fp.k
    return d_plus, mid, mid / d_plus


@dataclass(frozen=True)
class ModulationRow:
    t: float
    lam: float
    mu: float
    zeta: float
    b: float
    lam_dot: float
    mu_dot: float
    g_H: float
    kinetic: float
    residual: float
    newton_iters: int = 0
    cond: float = math.nan

    HEADER = ("t", "lambda", "mu", "zeta", "b", "lambda_dot", "mu_dot", "g_H", "kinetic", "residual")

    def as_row(self) -> list[float]:
        return [self.t, self.lam, self.mu, self.zeta, self.b, self.lam_dot, self.mu_dot, self.g_H,
                self.kinetic, self.residual]


def modulate(fp: FieldPair, t: float = 0.0, profile: VirialProfile | None = None, Z: CutoffZ | None = None,
             seed=None, eta0: float = 0.01, check_gate: bool = True, delta: float = 0.1) -> ModulationRow:
    """Full modulation record for one snapshot.

    Warns (:class:`AccuracyWarning`) when ``|zeta / lam - 1| > delta``: the
    state is then outside the regime where the corrected scale is meaningful.
    """
    Z = Z or CutoffZ(fp.k)
    profile = profile or VirialProfile(0.05, 20.0)
    fit = fit_orthogonal(fp, Z, seed=seed, eta0=eta0, check_gate=check_gate)
    ld, md, cond = mod_velocities(fp, fit.lam, fit.mu, Z, fit.g)
    z = zeta(fp, fit.lam, fit.mu, fit.g)
    if abs(z / fit.lam - 1.0) > delta:
        warnings.warn(f"t={t:.6g}: |zeta/lambda - 1| = {abs(z / fit.lam - 1):.3g} exceeds {delta}", AccuracyWarning,
                      stacklevel=2)
    return ModulationRow(t, fit.lam, fit.mu, z, bfunc(fp, fit.lam, fit.mu, profile, fit.g), ld, md, fit.g_H,
                         fit.kinetic, fit.residual, fit.iterations, cond)


# --------------------------------------------------------------- coercivity
def coercivity_quotient(k: int, lam: float, mu: float, constrained: bool = True, per_decade: int = 40,
                        decades: float = 3.0, Z: CutoffZ | None = None) -> float:
    """Smallest value of the linearised energy over the unit ``H``-sphere.

    The form ``int (g_r^2 + k^2 cos(2 (Q_lam - Q_mu)) g^2 / r^2) r dr`` is
    discretised with second-order differences in ``x = log r`` (Dirichlet at
    both ends) and the ``H`` inner product serves as the mass form.  With
    ``constrained=True`` the minimum is taken on the orthogonal complement of
    ``Z_lam_`` and ``Z_mu_``.  Pass ``mu = inf`` for a single bubble.
    """
    if not (math.isinf(mu) or lam <= 0.1 * mu):
        raise DomainError("coercivity needs lam / mu <= 0.1")
    Z = Z or CutoffZ(k)
    lo = math.log(lam) - decades * math.log(10.0)
    top = lam if math.isinf(mu) else mu
    hi = math.log(top) + decades * math.log(10.0)
    n = int(math.ceil((hi - lo) / math.log(10.0) * per_decade))
    x = np.linspace(lo, hi, n + 2)[1:-1]
    dx = x[1] - x[0]
    r = np.exp(x)
    psi = Q(r, k, lam) if math.isinf(mu) else two_bubble(r, k, lam, mu)
    lap = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / dx
    A = lap + dx * np.diag(k * k * np.cos(2.0 * psi))
    B = lap + dx * k * k * np.eye(n)
    if constrained:
        rows = [Z.values(r, lam) * r**2 * dx]
        if not math.isinf(mu):
            rows.append(Z.values(r, mu) * r**2 * dx)
        N = linalg.null_space(np.array(rows))
        A, B = N.T @ A @ N, N.T @ B @ N
    try:
        return float(linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])[0])
    except linalg.LinAlgError as exc:
        raise NumericalError(f"generalised eigenproblem failed ({n} nodes): {exc}") from exc
