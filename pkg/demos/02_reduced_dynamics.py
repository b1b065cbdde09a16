"""The two-dimensional reduced system for the inner scale and its momentum.

For k = 2 the inner scale grows exponentially at rate sqrt(16/pi).  For k > 2
the zero-energy branch concentrates like a power of time.

Run: python3 demos/02_reduced_dynamics.py
"""

import math

from wavemaps import asymptotics as asy

print("k = 2, starting at rest from zeta = 1e-4:")
traj = asy.integrate_ode(2, 1e-4, 0.0, zeta_stop=0.19)
fit = asy.rate_fit(traj, "exponential")
print(f"  fitted rate {fit.rate:.6f}, predicted {asy.rate_prediction(2):.6f} = sqrt(16/pi) = {math.sqrt(16 / math.pi):.6f}")
print(f"  stopped because {traj.stop_reason} at t = {traj.t[-1]:.3f}")

print("\nk > 2 on the zero-energy branch, two decades of concentration:")
for k in (3, 4, 5):
    z0 = 0.01
    traj = asy.integrate_ode(k, z0, -asy.separatrix_b(k, z0))
    fit = asy.rate_fit(traj, "power")
    print(f"  k={k}: exponent {fit.rate:+.5f} (predicted {asy.exponent_prediction(k):+.5f}),"
          f" prefactor {fit.prefactor:.5f} (predicted {asy.gamma_prediction(k):.5f})")

print("\nThe conserved quantity b^2/(2 kappa) - 8k zeta^k stays put, and xi = b + kappa1 zeta^(k/2)")
print("increases as long as it is positive:")
traj = asy.integrate_ode(3, 0.02, 0.0, horizon=1e6)
drift = abs(traj.invariant - traj.invariant[0]).max()
print(f"  k=3: invariant drift {drift:.2e}, xi monotone {traj.xi_monotone()}, kappa2 = {traj.kappa2():.4f}")
