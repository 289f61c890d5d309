"""
Two colliding flocks on the kinetic grid
========================================

Run the phase-space solver on the shipped two-bump configuration and check
the estimates along the trajectory.
"""

import math

from mtflock.config import load_config, shipped_config
from mtflock.kinetic_solver import run
from mtflock.limit_lab import energy_inequality_check, lp_growth_check, lp_rate_constant
from mtflock.phase_density import Grid, discretize, moments

##############################################################################
# Set up
# ------
#
# A coarser grid than the shipped 128 x 128 keeps this quick.

cfg = load_config(shipped_config("two_bumps"))
grid = Grid(cfg.grid.Lx, cfg.grid.Lv, 64, 64)
pd0 = discretize(cfg.make_initial(), grid)
scheme = cfg.scheme()
print("alignment mode:", scheme.mode, " mass:", pd0.mass)

##############################################################################
# Run
# ---

res = run(pd0, scheme)
print(f"{res.steps} steps to t = {res.final.t:g}")
for row in res.rows[:: max(1, len(res.rows) // 6)]:
    print(f"t={row.t:6.3f} E={row.energy:.5f} D_local={row.d_local:.4f} "
          f"D_CS={row.d_cs:.4f} |f|_inf={row.linf_f:.3f}")

##############################################################################
# The bulk velocity relaxes
# -------------------------
#
# The two clusters start with opposite velocities.  Compare the largest
# momentum density before and after.

rho, j = moments(res.final)
print("max |j| at t=0:", abs(moments(pd0)[1]).max(), " at the end:", abs(j).max())

##############################################################################
# Estimates
# ---------

ec = energy_inequality_check(res.rows, scheme.mt_constant, grid=grid)
print(f"energy inequality: passed={ec.passed} worst slack {ec.worst_margin:.3e}")
C = lp_rate_constant(scheme.phi, pd0.mass)
for p in (math.inf, 2):
    g = lp_growth_check(res.rows, p, C)
    print(f"L^{p} growth: passed={g.passed} rate slack {g.rate_margin:.3f}")
