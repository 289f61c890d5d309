"""Acceptance criteria 1-11, each at its stated tolerance and runtime.

Every test records one ``PASS``/``FAIL`` line; conftest prints them as a
block at the end of the session.
"""

import math
import time

import numpy as np
import pytest

from mtflock.config import load_config, shipped_config
from mtflock.kernels import flat_influence, make_influence, make_mollifier, mt_bound_constant, mt_ratio_sup
from mtflock.kinetic_solver import force_field, run
from mtflock.limit_lab import (TestFunctionSet, WeakResidual, divergence_identity_check,
                               energy_inequality_check, fitted_order, lp_growth_check,
                               lp_rate_constant, mollifier_convergence_test, r_sweep,
                               weak_residual)
from mtflock.particle_solver import ParticleEnsemble, ParticleModel, deposit, sample_ensemble
from mtflock.phase_density import (ConfinementPotential, Grid, PhaseDensity, discretize,
                                   moments)


def verdict(record_property, n, title, ok, detail, wall, limit):
    ok = bool(ok) and wall < limit
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {title} | {detail} | {wall:.1f} s (limit {limit:g} s)"
    record_property("acceptance", line)
    print(line)
    return ok


def line_grid(L, n):
    dx = 2 * L / n
    return -L + (np.arange(n) + 0.5) * dx


def two_clusters(n=100, seed=7):
    rng = np.random.default_rng(seed)
    h = n // 2
    x = np.concatenate([rng.normal(-0.4, 0.1, h), rng.normal(0.3, 0.05, n - h)])
    v = np.concatenate([rng.normal(0.3, 0.1, h), rng.normal(-0.2, 0.05, n - h)])
    # unequal cluster masses break the symmetry that would hide the MT drift
    m = np.concatenate([np.full(h, 0.6 / h), np.full(n - h, 0.4 / (n - h))])
    return ParticleEnsemble(x, v, m)


# ---------------------------------------------------------------------------
# shared kinetic runs


def _kinetic_trace(cfg, n):
    g = Grid(cfg.grid.Lx, cfg.grid.Lv, n, n)
    pd0 = discretize(cfg.make_initial(), g)
    t0 = time.perf_counter()
    res = run(pd0, cfg.scheme())
    return pd0, res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def two_bump_runs():
    cfg = load_config(shipped_config("two_bumps"))
    assert (cfg.grid.Nx, cfg.grid.Nv, cfg.time.t_end) == (128, 128, 1.0)
    return cfg, _kinetic_trace(cfg, 128), _kinetic_trace(cfg, 256)


@pytest.fixture(scope="module")
def cross_runs():
    cfg = load_config(shipped_config("cross_validation"))
    t0 = time.perf_counter()
    coarse = _kinetic_trace(cfg, cfg.grid.Nx)
    fine = _kinetic_trace(cfg, 2 * cfg.grid.Nx)
    kin_wall = time.perf_counter() - t0
    p = cfg.particles
    ens = sample_ensemble(cfg.make_initial(), p.n, p.seed)
    model = ParticleModel(cfg.influence(), cfg.mollifier(), cfg.potential_fn())
    t0 = time.perf_counter()
    final = model.run(ens, cfg.time.t_end, p.dt)
    part_wall = time.perf_counter() - t0
    return cfg, coarse, fine, ens, final, kin_wall + part_wall


# ---------------------------------------------------------------------------


def test_criterion_1_constant_influence_decay(record_property):
    lam, t_end, dt = 0.5, 2.0, 1e-4
    e = ParticleEnsemble([-0.5, 0.5], [1.0, -0.2], [1.0, 1.0])
    M = e.mass
    model = ParticleModel(flat_influence(lam))
    model.run(e, 10 * dt, dt)  # load compiled code before timing
    t0 = time.perf_counter()
    out = model.run(e, t_end, dt)
    wall = time.perf_counter() - t0
    vbar = (e.m @ e.v[:, 0]) / M
    dev0 = np.max(np.abs(e.v[:, 0] - vbar))
    ratio = np.max(np.abs(out.v[:, 0] - vbar)) / dev0
    exact = math.exp(-lam * M * t_end)
    rel = abs(ratio - exact) / exact
    ok = verdict(record_property, 1, "constant-influence decay", rel <= 1e-6,
                 f"ratio {ratio:.12f} vs exp(-lam M t) {exact:.12f}, rel err {rel:.2e} (tol 1e-6)",
                 wall, 1.0)
    assert ok


def test_criterion_2_momentum(record_property):
    e = two_clusters()
    t0 = time.perf_counter()
    off = ParticleModel(make_influence(1, 1)).run(e, 5.0, 1e-3)
    on = ParticleModel(make_influence(1, 1), make_mollifier("triangle", 0.2)).run(e, 5.0, 1e-3)
    wall = time.perf_counter() - t0
    d_off = abs(off.momentum[0] - e.momentum[0])
    d_on = abs(on.momentum[0] - e.momentum[0])
    ok = verdict(record_property, 2, "momentum conserved without MT, not with it",
                 d_off <= 1e-8 and d_on > 1e-6,
                 f"drift MT off {d_off:.2e} (<= 1e-8), MT on {d_on:.2e} (> 1e-6)", wall, 5.0)
    assert ok


def _bump_mixture(rng, x):
    rho = np.zeros_like(x)
    for _ in range(rng.integers(1, 6)):
        c = rng.uniform(-0.7, 0.7)
        w = rng.uniform(0.02, 0.3)
        s = np.abs(x - c) / w
        rho += rng.uniform(0.1, 3.0) * np.where(s < 1, np.cos(0.5 * np.pi * s) ** 2, 0.0)
    return rho


def test_criterion_3_uniform_mt_constant(record_property):
    x = line_grid(1.0, 400)
    rng = np.random.default_rng(2024)
    dens = [_bump_mixture(rng, x) for _ in range(100)]
    t0 = time.perf_counter()
    worst = {}
    consts = set()
    for r in (0.4, 0.1, 0.025):
        m = make_mollifier("triangle", r)
        consts.add(mt_bound_constant(m))
        worst[r] = max(mt_ratio_sup(m, rho, x) for rho in dens)
    wall = time.perf_counter() - t0
    (C,) = consts
    ok = verdict(record_property, 3, "MT ratio below one r-independent constant",
                 all(w <= C + 1e-8 for w in worst.values()),
                 "max sup ratio " + ", ".join(f"r={r:g}: {w:.4f}" for r, w in worst.items())
                 + f" vs C = {C:g}", wall, 30.0)
    assert ok


def test_criterion_4_divergence_identities(record_property):
    cfg = load_config(shipped_config("two_bumps"))
    pd = cfg.initial_density()
    g = pd.grid
    t0 = time.perf_counter()
    worst = 0.0
    for mol, align in ((make_mollifier("triangle", 0.1), True), (None, True), (None, False)):
        F = force_field(pd, cfg.influence(), mol, cfg.potential_fn(), alignment=align)
        worst = max(worst, divergence_identity_check(F, g.v))
        # the same identity on the solver's own face values
        A = F.acceleration(g.v_faces)
        worst = max(worst, float(np.max(np.abs(np.diff(A, axis=1) / g.dv
                                                - F.v_divergence()[:, None]))))
    # alignment alone gives -1, Cucker-Smale alone -Phi*rho
    mt_only = force_field(pd, None, make_mollifier("triangle", 0.1), None)
    cs_only = force_field(pd, cfg.influence(), None, None, alignment=False)
    worst = max(worst, float(np.max(np.abs(mt_only.v_divergence() + 1))),
                float(np.max(np.abs(cs_only.v_divergence() + cs_only.b))))
    wall = time.perf_counter() - t0
    ok = verdict(record_property, 4, "v-divergence identities", worst <= 1e-12,
                 f"max residual {worst:.2e} (tol 1e-12)", wall, 1.0)
    assert ok


def test_criterion_5_energy_inequality(record_property, two_bump_runs):
    cfg, (pd_c, res_c, wall_c), (pd_f, res_f, wall_f) = two_bump_runs
    C = cfg.scheme().mt_constant
    ec = energy_inequality_check(res_c.rows, C, grid=pd_c.grid)
    ef = energy_inequality_check(res_f.rows, C, grid=pd_f.grid)
    shrink = ec.scheme_defect / ef.scheme_defect
    ok = verdict(record_property, 5, "energy inequality and its refinement",
                 ec.passed and ef.passed and shrink >= 1.5,
                 f"worst slack {ec.worst_margin:.3e} at 128^2, {ef.worst_margin:.3e} at 256^2; "
                 f"scheme defect {ec.scheme_defect:.3e} -> {ef.scheme_defect:.3e} at 256^2, "
                 f"shrink x{shrink:.2f} (>= 1.5)", wall_c + wall_f, 120.0)
    assert ok


def test_criterion_6_lp_growth(record_property, two_bump_runs):
    cfg, (pd_c, res_c, wall_c), _ = two_bump_runs
    C = lp_rate_constant(cfg.influence(), pd_c.mass, alignment=True)
    gi = lp_growth_check(res_c.rows, math.inf, C, tol=0.05)
    g2 = lp_growth_check(res_c.rows, cfg.diagnostics.p, C, tol=0.05)
    ok = verdict(record_property, 6, "L^inf and L^2 growth bounds", gi.passed and g2.passed,
                 f"C = {C:.4g}; rate slack L^inf {gi.rate_margin:.3f}, L^2 {g2.rate_margin:.3f} "
                 f"(run shared with criterion 5)", 0.0, 1.0)
    assert ok


def test_criterion_7_mollifier_order(record_property):
    x = line_grid(5.12, 4096)
    rho = np.exp(-x ** 2 / 2) / math.sqrt(2 * math.pi)
    t0 = time.perf_counter()
    mc = mollifier_convergence_test("triangle", rho, x, [0.2, 0.1, 0.05, 0.025])
    wall = time.perf_counter() - t0
    ok = verdict(record_property, 7, "mollifier convergence order", mc.order >= 1.9,
                 "L1 gaps " + ", ".join(f"{v:.3e}" for v in mc.gaps)
                 + f"; fitted order {mc.order:.3f} (>= 1.9)", wall, 5.0)
    assert ok


@pytest.mark.slow
def test_criterion_8_r_sweep(record_property):
    cfg = load_config(shipped_config("sweep"))
    pd0 = cfg.initial_density()
    assert (pd0.grid.Nx, pd0.grid.Nv, cfg.time.t_end) == (128, 128, 0.5)
    s = cfg.sweep
    t0 = time.perf_counter()
    rep = r_sweep(pd0, cfg.scheme(r=0.0), [0.4, 0.2, 0.1, 0.05, 0.0], cfg.profile(),
                  TestFunctionSet(pd0.grid, cfg.time.t_end, s.test_degree), s.q)
    wall = time.perf_counter() - t0
    cols = ("l1_rho_gap", "l1_j_gap", "product_gap")
    parts = []
    for c in cols:
        facs = rep.halving_factors(c)
        parts.append(f"{c} x" + "/".join(f"{f:.2f}" for _, f in facs))
    smallest = [r for r in rep.rows if r.r > 0][-1].product_gap
    ok = verdict(record_property, 8, "r -> 0 sweep against the local run",
                 all(rep.halving_ok(c, 1.3, s.gap_floor) for c in cols)
                 and rep.smallest_r_product_ok(3.0),
                 "; ".join(parts) + f"; smallest-r product gap {smallest:.2e} vs 3 x residual "
                 f"{3 * rep.reference_residual:.2e}", wall, 600.0)
    assert ok


def test_criterion_9_weak_residual_orders(record_property):
    from mtflock.kinetic_solver import SchemeConfig

    def bump(s):
        return np.where(np.abs(s) < 1, np.cos(0.5 * np.pi * s) ** 4, 0.0)

    def f0(x, v):
        return bump((x + 0.3) / 0.25) * bump(v / 0.4)

    free = SchemeConfig(t_end=0.5, alignment=False, psi=ConfinementPotential(0.0))
    t0 = time.perf_counter()
    exact = []
    hs = [1.0, 0.5, 0.25]
    for n in (32, 64, 128):
        g = Grid(1.0, 0.6, n, n)
        snaps = [PhaseDensity(g, f0(g.x[:, None] - g.v[None, :] * t, g.v[None, :]), t)
                 for t in np.linspace(0, 0.5, n + 1)]
        exact.append(weak_residual(snaps, TestFunctionSet(g, 0.5), free))
    cfg = load_config(shipped_config("sweep"))
    solver = []
    for n in (32, 64, 128):
        g = Grid(cfg.grid.Lx, cfg.grid.Lv, n, n)
        sc = cfg.scheme(r=0.2)
        acc = WeakResidual(TestFunctionSet(g, sc.t_end), sc)
        run(discretize(cfg.make_initial(), g), sc, lambda pd, F: acc.add(pd, F))
        solver.append(acc.max())
    wall = time.perf_counter() - t0
    o_exact, o_solver = fitted_order(hs, exact), fitted_order(hs, solver)
    ok = verdict(record_property, 9, "weak residual orders", o_exact >= 1.9 and o_solver >= 0.9,
                 f"exact free transport order {o_exact:.2f} (>= 1.9), "
                 f"solver order {o_solver:.2f} (>= 0.9)", wall, 120.0)
    assert ok


@pytest.mark.slow
def test_criterion_10_cross_validation(record_property, cross_runs):
    cfg, (pd_c, res_c, _), (pd_f, res_f, _), ens, final, wall = cross_runs
    g = pd_c.grid
    rho_h = moments(res_c.final)[0]
    rho_f = moments(res_f.final)[0]
    # the fine density averaged onto the coarse cells
    rho_f = rho_f.reshape(-1, 2).mean(axis=1)
    # first-order scheme: |rho_h - rho| ~ 2 |rho_h - rho_h/2|
    budget = 2 * float(np.sum(np.abs(rho_h - rho_f)) * g.dx)
    rho_p = moments(deposit(final, g, cfg.particles.width))[0]
    dist = float(np.sum(np.abs(rho_p - rho_h)) * g.dx)
    mc = 5 / math.sqrt(ens.n) * ens.mass
    ok = verdict(record_property, 10, "particles vs kinetic density", dist <= mc + budget,
                 f"L1 distance {dist:.4f} vs 5 M/sqrt(N) {mc:.4f} + scheme budget {budget:.4f}",
                 wall, 180.0)
    assert ok


@pytest.mark.slow
def test_criterion_11_conservation(record_property, two_bump_runs, cross_runs):
    _, (pd_c, res_c, _), _ = two_bump_runs
    cfg, _, _, ens, final, _ = cross_runs
    m0 = res_c.rows[0].mass + res_c.rows[0].outflow
    kin = max(abs(r.mass + r.outflow - m0) for r in res_c.rows) / m0
    part_exact = np.array_equal(final.m, ens.m) and final.mass == ens.mass
    dep = abs(deposit(final, pd_c.grid, cfg.particles.width).mass - final.mass)
    ok = verdict(record_property, 11, "conservation plumbing",
                 kin <= 1e-10 and part_exact and dep <= 1e-12,
                 f"kinetic drift {kin:.2e} (<= 1e-10), particle mass exact: {part_exact}, "
                 f"deposit error {dep:.2e} (<= 1e-12)", 0.0, 1.0)
    assert ok
