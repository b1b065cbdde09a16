"""Tour of the harmonic-map family and the constants the rest of the lab leans on.

Run: python3 demos/01_bubbles_and_constants.py
"""

import math

import numpy as np

from wavemaps import asymptotics as asy
from wavemaps.functionals import FieldPair, bogomolnyi_defect, energy
from wavemaps.grid import geometric_grid
from wavemaps.statics import Q, kappa

grid = geometric_grid(1e-6, 1e6, 200)
r = grid.nodes

print("Each bubble Q_k = 2 arctan r^k carries energy 4 pi k, independent of its scale.")
for k in (2, 3, 4):
    for lam in (0.1, 10.0):
        fp = FieldPair(grid, Q(r, k, lam), None, k, 0, 1)
        print(f"  k={k} lam={lam:5}: E = {energy(fp):.10f}   4 pi k = {4 * math.pi * k:.10f}"
              f"   Bogomol'nyi defect = {bogomolnyi_defect(fp):.1e}")

print("\nThe squared L2 norm of the scaling generator is kappa = 2 pi / sin(pi/k).")
for k in (2, 3, 4, 5, 6):
    print(f"  k={k}: quadrature {asy.kappa_numeric(k):.12f}  closed form {kappa(k):.12f}")

print("\nTwo bubbles at scale ratio sigma interact at order sigma^k:")
for k in (2, 3):
    sig = np.geomspace(1e-3, 1e-1, 5)
    vals = [asy.interaction_integral(k, s) for s in sig]
    for s, v in zip(sig, vals):
        print(f"  k={k} sigma={s:.1e}: integral {v:.6e}  16 k sigma^k {16 * k * s**k:.6e}")
    print(f"  fitted log-log slope {asy.loglog_slope(sig, vals):.4f} (expected {k})")
