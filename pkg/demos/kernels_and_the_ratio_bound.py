"""
Kernels and the ratio bound
===========================

The two kernels of the model, and the constant that keeps the mollified
alignment term under control for every r.
"""

import numpy as np

from mtflock.kernels import (PROFILES, convolve, make_influence, make_mollifier,
                             mt_bound_constant, mt_ratio_sup)

##############################################################################
# Influence and mollifiers
# ------------------------
#
# The Cucker-Smale influence decays algebraically.  Mollifiers are compact
# profiles rescaled to unit mass at radius ``r``.

phi = make_influence(1.0, 1.0)
print("Phi(0), Phi(1):", float(phi(0.0)), float(phi(1.0)))

for name, p in PROFILES.items():
    m = make_mollifier(name, 0.1)
    print(f"{name:9s} R1={p.R1:.4f} R2={p.R2:.1f} K^r(0)={float(m(0.0)):.3f} C={mt_bound_constant(m):g}")

##############################################################################
# Convolution on a grid
# ---------------------
#
# Convolutions use midpoint sums on the solver grid, with the discrete
# weights renormalised so constants are reproduced exactly.

n = 800
x = -2 + (np.arange(n) + 0.5) * 4 / n
rho = np.exp(-x ** 2 / 0.08)
for r in (0.4, 0.2, 0.1):
    smooth = convolve(make_mollifier("triangle", r), rho, x)
    print(f"r={r:<4} max |K^r*rho - rho| = {np.abs(smooth - rho).max():.3e}")

##############################################################################
# The ratio constant
# ------------------
#
# ``sup_y int K^r(x-y) rho(x) / (K^r*rho)(x) dx`` stays below one constant
# whatever ``rho`` and ``r`` are.  Spiky densities are the hardest case.

rng = np.random.default_rng(0)
worst = 0.0
for _ in range(50):
    rho = rng.exponential(size=n) * (rng.random(n) < 0.05)
    for r in (0.4, 0.1, 0.03):
        worst = max(worst, mt_ratio_sup(make_mollifier("triangle", r), rho, x))
print(f"largest ratio seen {worst:.3f}, constant {mt_bound_constant(make_mollifier('triangle', 1)):g}")
