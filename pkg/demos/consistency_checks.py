"""
Consistency checks
==================

Mollifier convergence, the weak residual of an exact solution and of the
solver, and the full check suite on a shipped configuration.
"""

import math

import numpy as np

from mtflock.config import load_config, shipped_config
from mtflock.kinetic_solver import SchemeConfig
from mtflock.limit_lab import (TestFunctionSet, check_suite, fitted_order,
                               mollifier_convergence_test, weak_residual)
from mtflock.phase_density import ConfinementPotential, Grid, PhaseDensity

##############################################################################
# Mollifier convergence
# ---------------------
#
# Smooth data converge at order two in r, a kink at order one in the sup
# norm.

x = -5.12 + (np.arange(4096) + 0.5) * 10.24 / 4096
gauss = np.exp(-x ** 2 / 2) / math.sqrt(2 * math.pi)
print("gaussian:", mollifier_convergence_test("triangle", gauss, x, [0.2, 0.1, 0.05, 0.025]).order)
kink = np.clip(1 - np.abs(x), 0, None)
print("kink, sup norm:", mollifier_convergence_test("triangle", kink, x, [0.2, 0.1, 0.05],
                                                     norm=math.inf).order)

##############################################################################
# Weak residual of free transport
# -------------------------------
#
# ``f(t, x, v) = f0(x - v t, v)`` solves free transport exactly, so its
# residual is quadrature error alone.


def f0(x, v):
    s, w = (x + 0.3) / 0.25, v / 0.4
    return (np.where(abs(s) < 1, np.cos(0.5 * np.pi * s) ** 4, 0)
            * np.where(abs(w) < 1, np.cos(0.5 * np.pi * w) ** 4, 0))


free = SchemeConfig(t_end=0.5, alignment=False, psi=ConfinementPotential(0.0))
res = []
for n in (32, 64, 128):
    g = Grid(1.0, 0.6, n, n)
    snaps = [PhaseDensity(g, f0(g.x[:, None] - g.v[None, :] * t, g.v[None, :]), t)
             for t in np.linspace(0, 0.5, n + 1)]
    res.append(weak_residual(snaps, TestFunctionSet(g, 0.5), free))
print("residuals", res, "order", fitted_order([1, 0.5, 0.25], res))

##############################################################################
# Check suite
# -----------

cfg = load_config(shipped_config("local"))
pd0 = cfg.initial_density()
for c in check_suite(pd0, cfg.scheme(), TestFunctionSet(pd0.grid, cfg.time.t_end)):
    print(f"{'PASS' if c.passed else 'FAIL'} {c.name:22s} {c.detail}")
