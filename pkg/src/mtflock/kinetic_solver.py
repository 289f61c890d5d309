"""Finite-volume solver for the kinetic alignment equation in 1D.

Solves ``f_t + v f_x + (A f)_v = 0`` with the acceleration

    A(x, v) = -Psi'(x) + a(x) - b(x) v + (u_align(x) - v)

where ``a = Phi * j`` and ``b = Phi * rho`` carry the Cucker-Smale term and
``u_align`` is either the mollified velocity ``u~ = j~ / rho~`` (``r > 0``) or
the local bulk velocity ``u = j / rho`` (``r = 0``).

Time stepping is Strang splitting: half a step of free transport in ``x``, a
full step of transport in ``v`` under the force frozen at the start of the
step, and another half step in ``x``.  Each substep is a conservative
donor-cell update with an optional minmod MUSCL reconstruction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CFLViolation, MassLossExceeded, NegativeDensity
from .kernels import InfluenceKernel, Mollifier, convolve, mt_bound_constant
from .phase_density import (ConfinementPotential, DiagnosticsRow, PhaseDensity, bulk_velocity,
                            diagnostics, moments, weighted_moments)

log = logging.getLogger(__name__)

LIMITERS = ("none", "minmod")
# largest Courant number for which each reconstruction stays positive
COURANT_LIMIT = {"none": 1.0, "minmod": 0.5}


@dataclass
class ForceField:
    a: np.ndarray
    b: np.ndarray
    u_align: np.ndarray
    grad_psi: np.ndarray
    mode: str  # "mt", "local" or "off"

    @property
    def aligning(self) -> bool:
        return self.mode != "off"

    def alignment(self, v):
        """Alignment part ``a - b v + (u_align - v)`` on the (x, v) grid."""
        v = np.asarray(v, dtype=float)[None, :]
        out = self.a[:, None] - self.b[:, None] * v
        if self.aligning:
            out = out + (self.u_align[:, None] - v)
        return out

    def acceleration(self, v):
        return self.alignment(v) - self.grad_psi[:, None]

    def v_divergence(self):
        """Exact ``dA/dv`` per x cell: ``-b - 1`` with alignment, ``-b`` without."""
        return -self.b - (1.0 if self.aligning else 0.0)


@dataclass
class SchemeConfig:
    t_end: float = 1.0
    cfl: float = 0.4
    flux_limiter: str = "minmod"
    snapshot_stride: int = 0
    phi: InfluenceKernel | None = None
    mollifier: Mollifier | None = None
    psi: ConfinementPotential = field(default_factory=ConfinementPotential)
    alignment: bool = True
    # "adaptive": cfl * min(dx / v_max, dv / A_max) each step;
    # "bound": the same with an a-priori bound on A, so dt is fixed for a run
    dt_policy: str = "adaptive"
    p: float = 2.0
    mass_loss_limit: float = 1e-6
    conservation_tol: float = 1e-10

    def __post_init__(self):
        if self.flux_limiter not in LIMITERS:
            raise ValueError(f"flux_limiter must be one of {LIMITERS}")
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if self.dt_policy not in ("adaptive", "bound"):
            raise ValueError("dt_policy must be 'adaptive' or 'bound'")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @property
    def mode(self) -> str:
        if not self.alignment:
            return "off"
        return "mt" if self.mollifier is not None else "local"

    @property
    def r(self) -> float:
        return self.mollifier.r if self.mollifier is not None else 0.0

    @property
    def mt_constant(self) -> float:
        # local alignment obeys rho u^2 <= int v^2 f pointwise, hence C = 1
        if self.mode == "mt":
            return mt_bound_constant(self.mollifier)
        return 1.0


def force_field(pd: PhaseDensity, phi: InfluenceKernel | None, m: Mollifier | None,
                psi: ConfinementPotential | None, alignment: bool = True) -> ForceField:
    g = pd.grid
    x = g.x
    rho, j = moments(pd)
    if phi is None or phi.is_zero:
        a = np.zeros(g.Nx)
        b = np.zeros(g.Nx)
    else:
        a = convolve(phi, j, x)
        b = convolve(phi, rho, x)
    if not alignment:
        mode, u = "off", np.zeros(g.Nx)
    elif m is not None:
        mode, u = "mt", weighted_moments(pd, m)[2]
    else:
        mode, u = "local", bulk_velocity(rho, j)
    grad = psi.grad(x) if psi is not None else np.zeros(g.Nx)
    return ForceField(a, b, u, grad, mode)


def config_force(pd: PhaseDensity, cfg: SchemeConfig) -> ForceField:
    return force_field(pd, cfg.phi, cfg.mollifier, cfg.psi, cfg.alignment)


# ---------------------------------------------------------------------------
# transport substeps


def _fluxes(q, c, limiter):
    """Upwind face fluxes along the last axis.

    ``q`` holds cell values ``(m, n)``, ``c`` face speeds broadcastable to
    ``(m, n + 1)``.  Cells beyond the ends are empty, so nothing flows in.
    """
    m, n = q.shape
    qp = np.zeros((m, n + 2))
    qp[:, 1:-1] = q
    if limiter == "minmod":
        d = np.diff(qp, axis=1)
        dl, dr = d[:, :-1], d[:, 1:]
        s = np.where(dl * dr > 0, np.sign(dl) * np.minimum(np.abs(dl), np.abs(dr)), 0.0)
        half = np.zeros((m, n + 2))
        half[:, 1:-1] = 0.5 * s
        left = qp[:, :-1] + half[:, :-1]
        right = qp[:, 1:] - half[:, 1:]
    else:
        left = qp[:, :-1]
        right = qp[:, 1:]
    c = np.broadcast_to(c, (m, n + 1))
    return np.where(c > 0, c * left, c * right)


def transport_x(f, grid, dt, limiter="minmod"):
    """Free streaming ``f_t + v f_x = 0``; returns ``(f, outflow mass)``."""
    F = _fluxes(f.T, grid.v[:, None], limiter)
    f_new = f - (dt / grid.dx) * (F[:, 1:] - F[:, :-1]).T
    out = dt * grid.dv * float(np.sum(F[:, -1] - F[:, 0]))
    return f_new, out


def transport_v(f, grid, force: ForceField, dt, limiter="minmod"):
    """``f_t + (A f)_v = 0`` with ``A`` evaluated at velocity faces."""
    F = _fluxes(f, force.acceleration(grid.v_faces), limiter)
    f_new = f - (dt / grid.dv) * (F[:, 1:] - F[:, :-1])
    out = dt * grid.dx * float(np.sum(F[:, -1] - F[:, 0]))
    return f_new, out


def rhs(pd: PhaseDensity, force: ForceField, limiter="minmod") -> np.ndarray:
    """Semi-discrete right-hand side ``-(v f)_x - (A f)_v``."""
    g = pd.grid
    fx, _ = transport_x(pd.f, g, 1.0, limiter)
    fv, _ = transport_v(pd.f, g, force, 1.0, limiter)
    return (fx - pd.f) + (fv - pd.f)


def speeds(grid, force: ForceField):
    """``(max |v|, max |A|)`` over the transport faces."""
    v_max = float(np.max(np.abs(grid.v)))
    a_max = float(np.max(np.abs(force.acceleration(grid.v_faces))))
    return v_max, a_max


def acceleration_bound(grid, cfg: SchemeConfig, mass: float) -> float:
    """A-priori bound on ``|A|`` for densities supported in the domain."""
    lv = grid.Lv
    bound = cfg.psi.kappa * grid.Lx
    if cfg.phi is not None:
        bound += 2.0 * cfg.phi.sup_norm * mass * lv
    if cfg.alignment:
        bound += 2.0 * lv
    return bound


def stable_dt(pd: PhaseDensity, force: ForceField, cfg: SchemeConfig) -> float:
    g = pd.grid
    v_max, a_max = speeds(g, force)
    if cfg.dt_policy == "bound":
        a_max = acceleration_bound(g, cfg, pd.mass + pd.outflow)
    limits = [g.dx / v_max]
    if a_max > 0:
        limits.append(g.dv / a_max)
    return cfg.cfl * min(limits)


def step(pd: PhaseDensity, cfg: SchemeConfig, dt: float | None = None,
         force: ForceField | None = None) -> PhaseDensity:
    """Advance one Strang step; the returned density carries the new time."""
    g = pd.grid
    if force is None:
        force = config_force(pd, cfg)
    if dt is None:
        dt = stable_dt(pd, force, cfg)
    v_max, a_max = speeds(g, force)
    limit = COURANT_LIMIT[cfg.flux_limiter]
    courant = max(dt * v_max / g.dx, dt * a_max / g.dv)
    if courant > limit * (1 + 1e-12):
        raise CFLViolation(f"Courant number {courant:.4g} exceeds {limit} "
                           f"for limiter {cfg.flux_limiter!r} (dt = {dt:g})")
    lim = cfg.flux_limiter
    f, o1 = transport_x(pd.f, g, 0.5 * dt, lim)
    f, o2 = transport_v(f, g, force, dt, lim)
    f, o3 = transport_x(f, g, 0.5 * dt, lim)
    fmin = float(f.min())
    if fmin < 0 or not np.all(np.isfinite(f)):
        raise NegativeDensity(f"density left the admissible set after step at t = {pd.t:g} "
                              f"(min f = {fmin:g})")
    out = pd.outflow + o1 + o2 + o3
    new = PhaseDensity(g, f, pd.t + dt, out)
    total = new.mass + out
    if out > cfg.mass_loss_limit * total:
        raise MassLossExceeded(f"boundary outflow {out:.3g} exceeds {cfg.mass_loss_limit:g} "
                               f"of the mass by t = {new.t:g}; enlarge the domain")
    return new


@dataclass
class RunResult:
    rows: list[DiagnosticsRow]
    snapshots: list[PhaseDensity]
    final: PhaseDensity
    steps: int = 0


def run(pd0: PhaseDensity, cfg: SchemeConfig, callback=None) -> RunResult:
    """Integrate to ``cfg.t_end``.

    Diagnostics are recorded at every step (including t = 0 and the final
    time); snapshots every ``snapshot_stride`` steps plus the final state.
    ``callback(pd, force)`` sees the same states as the diagnostics.  On
    failure the exception carries the rows gathered so far as ``.rows``.
    """
    C = cfg.mt_constant
    m0 = pd0.mass + pd0.outflow
    rows: list[DiagnosticsRow] = []
    snaps: list[PhaseDensity] = []
    stride = cfg.snapshot_stride
    pd = pd0.copy()
    n = 0
    try:
        while True:
            force = config_force(pd, cfg)
            u = force.u_align if force.aligning else None
            rows.append(diagnostics(pd, u, cfg.phi, cfg.psi, C, cfg.p))
            if callback is not None:
                callback(pd, force)
            done = pd.t >= cfg.t_end * (1 - 1e-13)
            if stride and (n % stride == 0 or done):
                snaps.append(pd.copy())
            if done:
                break
            dt = min(stable_dt(pd, force, cfg), cfg.t_end - pd.t)
            pd = step(pd, cfg, dt, force)
            if abs(pd.mass + pd.outflow - m0) > cfg.conservation_tol * m0:
                raise MassLossExceeded(f"discrete mass balance broken at t = {pd.t:g}: "
                                       f"{pd.mass + pd.outflow - m0:.3e}")
            n += 1
    except Exception as exc:
        exc.rows = rows
        raise
    log.debug("run finished after %d steps (t = %g, outflow = %.3g)", n, pd.t, pd.outflow)
    return RunResult(rows, snaps, pd, n)
