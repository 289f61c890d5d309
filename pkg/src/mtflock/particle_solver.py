"""N-agent alignment dynamics and the bridge to the kinetic grid.

Each agent ``i`` with mass ``m_i`` moves by

    x_i' = v_i
    v_i' = -grad Psi(x_i)
           + sum_j m_j Phi(x_i - x_j) (v_j - v_i)
           + sum_j m_j K^r(x_i - x_j) (v_j - v_i) / sum_j m_j K^r(x_i - x_j)

The self term ``j = i`` is kept in both sums; it contributes nothing to the
numerators and keeps the Motsch-Tadmor denominator positive.  The
Cucker-Smale sum is not divided by ``N``: masses stand in for ``f dx dv``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .errors import NonFiniteState, ParticleOutsideDomain
from .kernels import PROFILES, InfluenceKernel, Mollifier, mt_bound_constant
from .phase_density import ConfinementPotential, DiagnosticsRow, Grid, PhaseDensity, lp_norm


@dataclass
class ParticleEnsemble:
    x: np.ndarray
    v: np.ndarray
    m: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        self.v = np.array(self.v, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        if self.v.ndim == 1:
            self.v = self.v[:, None]
        self.m = np.broadcast_to(np.asarray(self.m, dtype=float), (len(self.x),)).copy()
        if self.x.shape != self.v.shape or self.x.shape[1] not in (1, 2):
            raise ValueError(f"positions {self.x.shape} and velocities {self.v.shape} "
                             "must both be (n, 1) or (n, 2)")
        if np.any(self.m <= 0):
            raise ValueError("particle masses must be positive")

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def mass(self) -> float:
        return float(self.m.sum())

    @property
    def momentum(self) -> np.ndarray:
        return self.m @ self.v

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.x.copy(), self.v.copy(), self.m.copy(), self.t)


# ---------------------------------------------------------------------------
# compiled pair sums


@njit(cache=True, inline="always")
def _profile_value(kind, s, tab_s, tab_k):
    if kind == 0:
        return 1.0 - s if s < 1.0 else 0.0
    if kind == 1:
        q = 1.0 - s * s
        return q * q if q > 0.0 else 0.0
    if kind == 2:
        return 0.5 * (1.0 + math.cos(math.pi * s)) if s < 1.0 else 0.0
    if s >= tab_s[-1]:
        return 0.0
    lo = 0
    hi = tab_s.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tab_s[mid] <= s:
            lo = mid
        else:
            hi = mid
    t = (s - tab_s[lo]) / (tab_s[hi] - tab_s[lo])
    return tab_k[lo] + t * (tab_k[hi] - tab_k[lo])


@njit(cache=True, inline="always")
def _cs_row(x, v, m, lam, beta, i, out):
    n, d = x.shape
    a0 = 0.0
    a1 = 0.0
    for j in range(n):
        r2 = 0.0
        for k in range(d):
            dxk = x[i, k] - x[j, k]
            r2 += dxk * dxk
        if beta == 0.0:
            w = lam
        elif beta == 1.0:
            w = lam / (1.0 + r2)
        else:
            w = lam * (1.0 + r2) ** (-beta)
        w *= m[j]
        a0 += w * (v[j, 0] - v[i, 0])
        if d == 2:
            a1 += w * (v[j, 1] - v[i, 1])
    out[i, 0] = a0
    if d == 2:
        out[i, 1] = a1


@njit(parallel=True, cache=True)
def _cs_sums(x, v, m, lam, beta):
    n, d = x.shape
    acc = np.zeros((n, d))
    for i in prange(n):
        _cs_row(x, v, m, lam, beta, i, acc)
    return acc


@njit(cache=True)
def _cs_accel_serial(x, v, m, lam, beta, kappa, out):
    n = x.shape[0]
    for i in range(n):
        if lam != 0.0:
            _cs_row(x, v, m, lam, beta, i, out)
        else:
            out[i, :] = 0.0
        for k in range(x.shape[1]):
            out[i, k] -= kappa * x[i, k]


@njit(cache=True)
def _rk4_cs_run(x, v, m, lam, beta, kappa, h, nsteps):
    """Whole fixed-step RK4 run without the MT term, for small ensembles."""
    x = x.copy()
    v = v.copy()
    k1 = np.empty_like(v)
    k2 = np.empty_like(v)
    k3 = np.empty_like(v)
    k4 = np.empty_like(v)
    for _ in range(nsteps):
        _cs_accel_serial(x, v, m, lam, beta, kappa, k1)
        x2 = x + 0.5 * h * v
        v2 = v + 0.5 * h * k1
        _cs_accel_serial(x2, v2, m, lam, beta, kappa, k2)
        x3 = x + 0.5 * h * v2
        v3 = v + 0.5 * h * k2
        _cs_accel_serial(x3, v3, m, lam, beta, kappa, k3)
        x4 = x + h * v3
        v4 = v + h * k3
        _cs_accel_serial(x4, v4, m, lam, beta, kappa, k4)
        x = x + h / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
        v = v + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x, v


@njit(parallel=True, cache=True)
def _mt_cells(xs, vs, ms, r, reach, kind, tab_s, tab_k, start, cx, cy, ncx, ncy):
    # all arrays are in cell order
    n, d = xs.shape
    out = np.zeros((n, d))
    ylo = -1 if d == 2 else 0
    yhi = 1 if d == 2 else 0
    for i in prange(n):
        num0 = 0.0
        num1 = 0.0
        den = 0.0
        for oy in range(ylo, yhi + 1):
            py = cy[i] + oy
            if py < 0 or py >= ncy:
                continue
            # cells (px-1 .. px+1, py) are contiguous in cell order
            lo = max(cx[i] - 1, 0) + ncx * py
            hi = min(cx[i] + 1, ncx - 1) + ncx * py
            for j in range(start[lo], start[hi + 1]):
                r2 = 0.0
                for k in range(d):
                    dxk = xs[i, k] - xs[j, k]
                    r2 += dxk * dxk
                s = math.sqrt(r2) / r
                if s < reach:
                    w = ms[j] * _profile_value(kind, s, tab_s, tab_k)
                    den += w
                    num0 += w * (vs[j, 0] - vs[i, 0])
                    if d == 2:
                        num1 += w * (vs[j, 1] - vs[i, 1])
        out[i, 0] = num0 / den
        if d == 2:
            out[i, 1] = num1 / den
    return out


@njit(cache=True, inline="always")
def _mt_window_row(xs, vs, ms, r, kind, tab_s, tab_k, lo, hi, i, out):
    num = 0.0
    den = 0.0
    xi = xs[i]
    vi = vs[i]
    for j in range(lo[i], hi[i]):
        w = ms[j] * _profile_value(kind, abs(xi - xs[j]) / r, tab_s, tab_k)
        den += w
        num += w * (vs[j] - vi)
    out[i] = num / den


@njit(parallel=True, cache=True)
def _mt_window(xs, vs, ms, r, reach, kind, tab_s, tab_k):
    # 1D, xs sorted: neighbours of i are the slice lo[i]:hi[i]
    n = xs.size
    out = np.empty(n)
    h = r * reach
    lo = np.searchsorted(xs, xs - h, side="right")
    hi = np.searchsorted(xs, xs + h, side="left")
    for i in prange(n):
        _mt_window_row(xs, vs, ms, r, kind, tab_s, tab_k, lo, hi, i, out)
    return out


@njit(cache=True)
def _mt_window_serial(xs, vs, ms, r, reach, kind, tab_s, tab_k):
    n = xs.size
    out = np.empty(n)
    h = r * reach
    lo = np.searchsorted(xs, xs - h, side="right")
    hi = np.searchsorted(xs, xs + h, side="left")
    for i in range(n):
        _mt_window_row(xs, vs, ms, r, kind, tab_s, tab_k, lo, hi, i, out)
    return out


@njit(cache=True)
def _cs_sums_serial(x, v, m, lam, beta):
    n, d = x.shape
    acc = np.zeros((n, d))
    for i in range(n):
        _cs_row(x, v, m, lam, beta, i, acc)
    return acc


# below this many agents a parallel launch costs more than the sums
_SERIAL_MAX_N = 512


def _profile_code(mol: Mollifier):
    p = mol.profile
    for code, name in enumerate(("triangle", "bump2", "cosine")):
        if p is PROFILES[name]:
            return code, np.zeros(1), np.zeros(1)
    if p.nodes is not None:
        return 3, np.asarray(p.nodes[0], dtype=float), np.asarray(p.nodes[1], dtype=float)
    s = np.linspace(0.0, p.R2, 8193)
    return 3, s, np.asarray(p(s), dtype=float)


def cell_list(x, cell: float):
    """Bin positions into square cells of side ``cell``.

    Returns ``(order, start, cx, cy, ncx, ncy)``: particles sorted by cell,
    the offset of each cell in that order, and per-particle cell coordinates.
    """
    lo = x.min(axis=0)
    idx = np.floor((x - lo) / cell).astype(np.int64)
    ncx = int(idx[:, 0].max()) + 1
    if x.shape[1] == 2:
        cy = idx[:, 1]
        ncy = int(cy.max()) + 1
    else:
        cy = np.zeros(len(x), dtype=np.int64)
        ncy = 1
    cid = idx[:, 0] + ncx * cy
    order = np.argsort(cid, kind="stable")
    counts = np.bincount(cid, minlength=ncx * ncy)
    start = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return order.astype(np.int64), start, idx[:, 0].copy(), cy.copy(), ncx, ncy


# ---------------------------------------------------------------------------
# model


@dataclass
class ParticleModel:
    phi: InfluenceKernel | None = None
    mollifier: Mollifier | None = None
    psi: ConfinementPotential = field(default_factory=ConfinementPotential)
    # "cells" (cell lists) or "direct" (all pairs, numpy)
    method: str = "cells"

    def cs_term(self, e: ParticleEnsemble) -> np.ndarray:
        if self.phi is None or self.phi.is_zero:
            return np.zeros_like(e.v)
        if self.method == "direct":
            diff = e.x[:, None, :] - e.x[None, :, :]
            w = self.phi.radial(np.sqrt(np.sum(diff * diff, axis=-1))) * e.m[None, :]
            return np.einsum("ij,ijk->ik", w, e.v[None, :, :] - e.v[:, None, :])
        sums = _cs_sums_serial if e.n <= _SERIAL_MAX_N else _cs_sums
        return sums(e.x, e.v, e.m, float(self.phi.lam), float(self.phi.beta))

    def mt_term(self, e: ParticleEnsemble) -> np.ndarray:
        """``u~_i - v_i`` at every agent (zero when the MT term is off)."""
        mol = self.mollifier
        if mol is None:
            return np.zeros_like(e.v)
        if self.method == "direct":
            diff = e.x[:, None, :] - e.x[None, :, :]
            w = mol.profile(np.sqrt(np.sum(diff * diff, axis=-1)) / mol.r) * e.m[None, :]
            num = np.einsum("ij,ijk->ik", w, e.v[None, :, :] - e.v[:, None, :])
            return num / w.sum(axis=1)[:, None]
        kind, ts, tk = _profile_code(mol)
        if e.dim == 1:
            order = np.argsort(e.x[:, 0], kind="stable")
            window = _mt_window_serial if e.n <= _SERIAL_MAX_N else _mt_window
            res = window(e.x[order, 0], e.v[order, 0], e.m[order], float(mol.r),
                             float(mol.R2), kind, ts, tk)
            out = np.empty_like(e.v)
            out[order, 0] = res
            return out
        order, start, cx, cy, ncx, ncy = cell_list(e.x, mol.support_radius)
        res = _mt_cells(e.x[order], e.v[order], e.m[order], float(mol.r), float(mol.R2),
                        kind, ts, tk, start, cx[order], cy[order], ncx, ncy)
        out = np.empty_like(res)
        out[order] = res
        return out

    def accelerations(self, e: ParticleEnsemble) -> np.ndarray:
        return self.cs_term(e) + self.mt_term(e) - self.psi.grad(e.x)

    def step_rk4(self, e: ParticleEnsemble, dt: float) -> ParticleEnsemble:
        if not dt > 0:
            raise ValueError("dt must be positive")
        x0, v0 = e.x, e.v

        def deriv(x, v):
            return v, self.accelerations(ParticleEnsemble(x, v, e.m))

        k1x, k1v = deriv(x0, v0)
        k2x, k2v = deriv(x0 + 0.5 * dt * k1x, v0 + 0.5 * dt * k1v)
        k3x, k3v = deriv(x0 + 0.5 * dt * k2x, v0 + 0.5 * dt * k2v)
        k4x, k4v = deriv(x0 + dt * k3x, v0 + dt * k3v)
        x = x0 + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v0 + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise NonFiniteState(f"non-finite particle state after step at t = {e.t:g}")
        return ParticleEnsemble(x, v, e.m, e.t + dt)

    @property
    def mt_constant(self) -> float:
        return mt_bound_constant(self.mollifier) if self.mollifier is not None else 1.0

    def diagnostics(self, e: ParticleEnsemble, grid: Grid | None = None, width: int = 2,
                    p: float = 2.0, outflow: float = 0.0) -> DiagnosticsRow:
        """Same schema as the kinetic diagnostics, computed from pair sums.

        The density norms need a deposition grid; without one they are NaN.
        """
        v2 = np.sum(e.v * e.v, axis=1)
        en = float(e.m @ (0.5 * v2 + self.psi(e.x if e.dim == 2 else e.x[:, 0])))
        mt = self.mt_term(e)
        d_local = float(e.m @ np.sum(mt * mt, axis=1))
        d_cs = float(-(e.m @ np.sum(e.v * self.cs_term(e), axis=1)))
        lhs = float(e.m @ np.sum(e.v * mt, axis=1))
        mom = e.momentum
        momentum = float(mom[0]) if e.dim == 1 else float(np.linalg.norm(mom))
        linf = lp = math.nan
        if grid is not None and e.dim == 1:
            pd = deposit(e, grid, width)
            linf, lp = lp_norm(pd, math.inf), lp_norm(pd, p)
        return DiagnosticsRow(t=e.t, mass=e.mass, momentum=momentum, energy=en,
                              d_local=d_local, d_cs=d_cs, linf_f=linf, lp_f=lp,
                              lbound_lhs=lhs, lbound_rhs=self.mt_constant * en - 0.5 * d_local,
                              outflow=outflow)

    def run(self, e: ParticleEnsemble, t_end: float, dt: float, callback=None):
        """Fixed-step RK4 to ``t_end``; ``callback(e)`` sees every state."""
        nsteps = max(1, int(round(t_end / dt)))
        h = t_end / nsteps
        if callback is None and self._compiled_ok(e):
            phi = self.phi
            lam, beta = (0.0, 0.0) if phi is None else (float(phi.lam), float(phi.beta))
            x, v = _rk4_cs_run(e.x, e.v, e.m, lam, beta, float(self.psi.kappa), h, nsteps)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                raise NonFiniteState("non-finite particle state during the run")
            return ParticleEnsemble(x, v, e.m, e.t + nsteps * h)
        if callback is not None:
            callback(e)
        for _ in range(nsteps):
            e = self.step_rk4(e, h)
            if callback is not None:
                callback(e)
        return e

    # small ensembles without the MT term run entirely in compiled code;
    # the per-step Python overhead would otherwise dominate
    _COMPILED_MAX_N = 256

    def _compiled_ok(self, e: ParticleEnsemble) -> bool:
        return (self.mollifier is None and self.method == "cells"
                and e.n <= self._COMPILED_MAX_N)


def accelerations(e: ParticleEnsemble, phi=None, mollifier=None, psi=None, method="cells"):
    model = ParticleModel(phi, mollifier, psi or ConfinementPotential(), method)
    return model.accelerations(e)


# ---------------------------------------------------------------------------
# deposition


def _tent_weights(pos, lo, h, n, width):
    """Cell indices ``(P, 2w)`` and tent weights of half-width ``width`` cells."""
    s = (pos - lo) / h - 0.5
    base = np.floor(s).astype(np.int64)
    offs = np.arange(-width + 1, width + 1)
    idx = base[:, None] + offs[None, :]
    w = np.clip(1.0 - np.abs(s[:, None] - idx) / width, 0.0, None)
    if idx.min() < 0 or idx.max() >= n:
        raise ParticleOutsideDomain("deposition stencil leaves the grid; enlarge the domain")
    return idx, w / w.sum(axis=1, keepdims=True)


def deposit(e: ParticleEnsemble, grid: Grid, width: int = 2) -> PhaseDensity:
    """Spread each agent's mass with a tensor-product tent of ``width`` cells.

    Tents of integer half-width reproduce constants and linear functions, so
    mass and the first moments in ``x`` and ``v`` are preserved exactly.
    """
    if e.dim != 1:
        raise ValueError("deposition onto the phase-space grid is one-dimensional")
    if int(width) != width or width < 2:
        raise ValueError("deposition width must be an integer >= 2 cells")
    width = int(width)
    ix, wx = _tent_weights(e.x[:, 0], -grid.Lx, grid.dx, grid.Nx, width)
    iv, wv = _tent_weights(e.v[:, 0], -grid.Lv, grid.dv, grid.Nv, width)
    flat = (ix[:, :, None] * grid.Nv + iv[:, None, :]).ravel()
    wt = (e.m[:, None, None] * wx[:, :, None] * wv[:, None, :]).ravel()
    f = np.bincount(flat, weights=wt, minlength=grid.Nx * grid.Nv).reshape(grid.shape)
    return PhaseDensity(grid, f / grid.cell_volume, e.t)


def sample_ensemble(profile, n: int, seed: int, mass: float | None = None) -> ParticleEnsemble:
    """Equal-mass agents drawn from a kinetic initial profile."""
    rng = np.random.default_rng(seed)
    x, v = profile.sample(n, rng)
    total = profile.params["mass"] if mass is None else mass
    return ParticleEnsemble(x, v, np.full(n, total / n))
