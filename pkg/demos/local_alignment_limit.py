"""
The local alignment limit
=========================

Shrink the mollifier radius and watch the solution approach the run with
purely local alignment.
"""

from mtflock.config import load_config, shipped_config
from mtflock.limit_lab import SweepRow, TestFunctionSet, r_sweep
from mtflock.phase_density import Grid, discretize

cfg = load_config(shipped_config("sweep"))
grid = Grid(cfg.grid.Lx, cfg.grid.Lv, 64, 64)
pd0 = discretize(cfg.make_initial(), grid)
phis = TestFunctionSet(grid, cfg.time.t_end)

##############################################################################
# Sweep
# -----
#
# Every run shares the r = 0 run's time grid, so gaps are compared at equal
# times.  The smallest radius must still span four cells.

rep = r_sweep(pd0, cfg.scheme(r=0.0), [0.4, 0.2, 0.1, 0], cfg.profile(), phis)
print(",".join(SweepRow.columns()))
for row in rep.rows:
    print(",".join(f"{v:.4g}" for v in row.values()))

##############################################################################
# Rates
# -----

for col in ("l1_rho_gap", "l1_j_gap", "product_gap"):
    print(col, ["%.2f" % f for _, f in rep.halving_factors(col)])
print("weak residual of the local run:", rep.reference_residual)
