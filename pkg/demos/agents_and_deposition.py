"""
Agents, decay laws and deposition
=================================

The particle system behind the kinetic equation: an exact decay law, the
momentum drift caused by the normalised alignment, and a comparison with
the kinetic density.
"""

import math

import numpy as np

from mtflock.kernels import flat_influence, make_influence, make_mollifier
from mtflock.particle_solver import ParticleEnsemble, ParticleModel, deposit, sample_ensemble
from mtflock.phase_density import ConfinementPotential, Grid, discretize, make_initial, moments

##############################################################################
# Flat influence
# --------------
#
# With a constant influence ``lam`` and total mass ``M`` every velocity
# relaxes to the mean like ``exp(-lam M t)``.

e = ParticleEnsemble([-0.5, 0.5], [1.0, -0.2], [1.0, 1.0])
out = ParticleModel(flat_influence(0.5)).run(e, 2.0, 1e-3)
vbar = e.momentum[0] / e.mass
print("decay:", (out.v[0, 0] - vbar) / (e.v[0, 0] - vbar), "expected", math.exp(-0.5 * 2 * 2))

##############################################################################
# Momentum
# --------
#
# Symmetric pair interactions conserve momentum.  The normalised alignment
# term does not.

rng = np.random.default_rng(1)
x = np.concatenate([rng.normal(-0.4, 0.1, 50), rng.normal(0.3, 0.05, 50)])
v = np.concatenate([rng.normal(0.3, 0.1, 50), rng.normal(-0.2, 0.05, 50)])
m = np.concatenate([np.full(50, 0.012), np.full(50, 0.008)])
flock = ParticleEnsemble(x, v, m)
for label, mol in (("pairwise only", None), ("with MT", make_mollifier("triangle", 0.2))):
    end = ParticleModel(make_influence(1, 1), mol).run(flock, 2.0, 1e-2)
    print(f"{label:14s} momentum drift {end.momentum[0] - flock.momentum[0]:+.3e}")

##############################################################################
# From agents to a density
# ------------------------
#
# Agents sampled from a kinetic profile, moved, then spread back onto the
# grid with a tent of two cells.

prof = make_initial("two_bumps")
grid = Grid(0.8, 1.0, 64, 64)
ens = sample_ensemble(prof, 4000, seed=7)
model = ParticleModel(make_influence(1, 1), make_mollifier("triangle", 0.2), ConfinementPotential(1.0))
pd = deposit(model.run(ens, 0.25, 0.05), grid)
print("deposited mass", pd.mass, "of", ens.mass)
rho0 = moments(discretize(prof, grid))[0]
print("L1 change of rho over the run:", np.sum(np.abs(moments(pd)[0] - rho0)) * grid.dx)
