"""Discrete phase-space densities ``f(t, x, v)`` in one space dimension.

Cell averages live on a uniform ``Nx x Nv`` grid over ``[-Lx, Lx] x [-Lv, Lv]``.
Every integral below is the midpoint rule on that grid, so moments, mass and
norms are mutually consistent to roundoff.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .kernels import InfluenceKernel, Mollifier, convolve

# relative vacuum threshold: rho <= VACUUM_FLOOR * max(rho) counts as vacuum
VACUUM_FLOOR = 1e-12
# empty cell layers kept at both ends of the velocity axis
V_BUFFER = 2


@dataclass(frozen=True)
class Grid:
    Lx: float
    Lv: float
    Nx: int
    Nv: int

    def __post_init__(self):
        if not (self.Lx > 0 and self.Lv > 0):
            raise ValueError("domain half-widths must be positive")
        if self.Nx < 2 or self.Nv < 2 * V_BUFFER + 2:
            raise ValueError(f"grid too small: Nx={self.Nx}, Nv={self.Nv}")

    @property
    def dx(self) -> float:
        return 2.0 * self.Lx / self.Nx

    @property
    def dv(self) -> float:
        return 2.0 * self.Lv / self.Nv

    @property
    def x(self) -> np.ndarray:
        return -self.Lx + (np.arange(self.Nx) + 0.5) * self.dx

    @property
    def v(self) -> np.ndarray:
        return -self.Lv + (np.arange(self.Nv) + 0.5) * self.dv

    @property
    def v_faces(self) -> np.ndarray:
        return -self.Lv + np.arange(self.Nv + 1) * self.dv

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nx, self.Nv)

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dv

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.Lx, self.Lv, self.Nx * factor, self.Nv * factor)


@dataclass
class PhaseDensity:
    grid: Grid
    f: np.ndarray
    t: float = 0.0
    # cumulative mass that left through the domain boundary
    outflow: float = 0.0

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != self.grid.shape:
            raise ValueError(f"f has shape {self.f.shape}, grid is {self.grid.shape}")

    @property
    def mass(self) -> float:
        return float(self.f.sum() * self.grid.cell_volume)

    def copy(self) -> "PhaseDensity":
        return PhaseDensity(self.grid, self.f.copy(), self.t, self.outflow)

    def buffer_mass(self) -> float:
        """Mass sitting in the reserved outer velocity layers."""
        b = V_BUFFER
        return float((self.f[:, :b].sum() + self.f[:, -b:].sum()) * self.grid.cell_volume)

    def validate(self):
        if not np.all(np.isfinite(self.f)):
            raise ValueError("non-finite density values")
        if self.f.min() < 0:
            raise ValueError(f"negative density: min f = {self.f.min():g}")


@dataclass
class MomentField:
    rho: np.ndarray
    j: np.ndarray
    u: np.ndarray
    rho_t: np.ndarray | None = None
    j_t: np.ndarray | None = None
    u_t: np.ndarray | None = None


@dataclass(frozen=True)
class ConfinementPotential:
    """``Psi(x) = kappa |x|^2 / 2``; ``kappa = 0`` switches confinement off."""

    kappa: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim >= 1 and x.shape[-1:] == (2,):
            return 0.5 * self.kappa * np.sum(x * x, axis=-1)
        return 0.5 * self.kappa * x * x

    def grad(self, x):
        return self.kappa * np.asarray(x, dtype=float)


@dataclass
class DiagnosticsRow:
    t: float
    mass: float
    momentum: float
    energy: float
    d_local: float
    d_cs: float
    linf_f: float
    lp_f: float
    lbound_lhs: float
    lbound_rhs: float
    outflow: float

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in self.columns())


# ---------------------------------------------------------------------------
# moments


def moments(pd: PhaseDensity):
    """``(rho, j)`` with ``rho = int f dv`` and ``j = int v f dv``."""
    g = pd.grid
    rho = pd.f.sum(axis=1) * g.dv
    j = pd.f @ g.v * g.dv
    return rho, j


def second_moment(pd: PhaseDensity) -> np.ndarray:
    g = pd.grid
    return pd.f @ (g.v * g.v) * g.dv


def bulk_velocity(rho, j, floor: float | None = None) -> np.ndarray:
    """``j / rho`` off vacuum and exactly 0 on vacuum.

    ``floor`` is an absolute vacuum threshold; by default it is
    ``VACUUM_FLOOR * max(rho)``.
    """
    rho = np.asarray(rho, dtype=float)
    j = np.asarray(j, dtype=float)
    if floor is None:
        floor = VACUUM_FLOOR * (float(rho.max()) if rho.size else 0.0)
    u = np.zeros(np.broadcast(rho, j).shape)
    live = rho > floor
    u[live] = j[live] / rho[live]
    u[~np.isfinite(u)] = 0.0
    return u


def weighted_moments(pd: PhaseDensity, m: Mollifier):
    """``(rho~, j~, u~)``: the moments averaged against the mollifier."""
    rho, j = moments(pd)
    x = pd.grid.x
    rho_t = convolve(m, rho, x)
    j_t = convolve(m, j, x)
    return rho_t, j_t, bulk_velocity(rho_t, j_t)


def moment_field(pd: PhaseDensity, m: Mollifier | None = None) -> MomentField:
    rho, j = moments(pd)
    mf = MomentField(rho, j, bulk_velocity(rho, j))
    if m is not None:
        mf.rho_t, mf.j_t, mf.u_t = weighted_moments(pd, m)
    return mf


def energy(pd: PhaseDensity, psi: ConfinementPotential | None = None) -> float:
    """``int (v^2 / 2 + Psi(x)) f dv dx``."""
    g = pd.grid
    kin = 0.5 * (g.v * g.v)
    e = float(np.sum(pd.f @ kin) * g.cell_volume)
    if psi is not None and psi.kappa:
        e += float(np.sum(psi(g.x) * pd.f.sum(axis=1)) * g.cell_volume)
    return e


def dissipations(pd: PhaseDensity, u, phi: InfluenceKernel | None):
    """``(D_local, D_CS)``.

    ``D_local = int f |u - v|^2`` and ``D_CS = 1/2 int Phi(x-y) f f |w - v|^2``.
    The four-fold integral is folded onto the moments ``rho, j, S``:
    ``D_CS = int rho (Phi * S) - j (Phi * j) dx``.
    """
    g = pd.grid
    u = np.asarray(u, dtype=float)
    dv2 = (u[:, None] - g.v[None, :]) ** 2
    d_local = float(np.sum(pd.f * dv2) * g.cell_volume)
    if phi is None or phi.is_zero:
        return d_local, 0.0
    rho, j = moments(pd)
    S = second_moment(pd)
    x = g.x
    d_cs = float(np.sum(rho * convolve(phi, S, x) - j * convolve(phi, j, x)) * g.dx)
    return d_local, d_cs


def lp_norm(pd: PhaseDensity, p) -> float:
    p = float(p)
    if p == math.inf:
        return float(pd.f.max()) if pd.f.size else 0.0
    if p < 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return float((np.sum(pd.f ** p) * pd.grid.cell_volume) ** (1.0 / p))


def diagnostics(pd: PhaseDensity, u_align, phi, psi, mt_constant: float,
                p: float = 2.0) -> DiagnosticsRow:
    """One row of the per-step diagnostics table.

    ``u_align`` is the velocity the alignment relaxes to (``u~`` or ``u``),
    or None when the alignment term is switched off (its power and
    dissipation are then zero).  ``mt_constant`` is the constant of the
    alignment bound ``int f v (u_align - v) <= C E - D_local / 2``.
    """
    g = pd.grid
    rho, j = moments(pd)
    e = energy(pd, psi)
    if u_align is None:
        d_local, lhs = 0.0, 0.0
        d_cs = dissipations(pd, np.zeros(g.Nx), phi)[1]
    else:
        u_align = np.asarray(u_align, dtype=float)
        d_local, d_cs = dissipations(pd, u_align, phi)
        lhs = float(np.sum(pd.f * g.v[None, :] * (u_align[:, None] - g.v[None, :]))
                    * g.cell_volume)
    return DiagnosticsRow(
        t=pd.t, mass=pd.mass, momentum=float(j.sum() * g.dx), energy=e,
        d_local=d_local, d_cs=d_cs, linf_f=lp_norm(pd, math.inf), lp_f=lp_norm(pd, p),
        lbound_lhs=lhs, lbound_rhs=mt_constant * e - 0.5 * d_local, outflow=pd.outflow)


# ---------------------------------------------------------------------------
# initial data


def _bump(s):
    """``cos(pi s / 2)^4`` on ``|s| < 1``; C^3 with unit peak and integral 3/4."""
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, np.cos(0.5 * np.pi * np.clip(s, -1, 1)) ** 4, 0.0)


_BUMP_MASS = 0.75


def _cut_gauss(s, cut):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < cut, np.exp(-0.5 * s * s) - math.exp(-0.5 * cut * cut), 0.0)


def _cut_gauss_mass(cut):
    return math.sqrt(2 * math.pi) * math.erf(cut / math.sqrt(2)) - 2 * cut * math.exp(-0.5 * cut * cut)


@dataclass(frozen=True)
class InitialProfile:
    """A continuous initial datum ``f0(x, v)`` with compact support."""

    name: str
    params: dict = field(compare=False)

    def __call__(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        p = self.params
        if self.name == "two_bumps":
            wx, wv = p["wx"], p["wv"]
            norm = p["mass"] / (wx * wv * _BUMP_MASS ** 2)
            a = p["frac"] * _bump((x - p["x1"]) / wx) * _bump((v - p["v1"]) / wv)
            b = (1 - p["frac"]) * _bump((x - p["x2"]) / wx) * _bump((v - p["v2"]) / wv)
            return norm * (a + b)
        if self.name == "gaussian_product":
            cut = p["cut"]
            norm = p["mass"] / (p["sx"] * p["sv"] * _cut_gauss_mass(cut) ** 2)
            return norm * _cut_gauss((x - p["x0"]) / p["sx"], cut) * _cut_gauss((v - p["v0"]) / p["sv"], cut)
        if self.name == "riemann":
            a, wv = p["a"], p["wv"]
            raw = a * (p["rho_left"] + p["rho_right"]) * wv * _BUMP_MASS
            left = (x >= -a) & (x < 0)
            right = (x >= 0) & (x < a)
            val = (p["rho_left"] * left * _bump((v - p["u_left"]) / wv)
                   + p["rho_right"] * right * _bump((v - p["u_right"]) / wv))
            return p["mass"] / raw * val
        raise ValueError(f"unknown initial profile {self.name!r}")

    def support_box(self):
        """``(xmin, xmax, vmin, vmax)`` containing the support."""
        p = self.params
        if self.name == "two_bumps":
            xs = (p["x1"], p["x2"])
            vs = (p["v1"], p["v2"])
            return (min(xs) - p["wx"], max(xs) + p["wx"], min(vs) - p["wv"], max(vs) + p["wv"])
        if self.name == "gaussian_product":
            c = p["cut"]
            return (p["x0"] - c * p["sx"], p["x0"] + c * p["sx"], p["v0"] - c * p["sv"], p["v0"] + c * p["sv"])
        us = (p["u_left"], p["u_right"])
        return (-p["a"], p["a"], min(us) - p["wv"], max(us) + p["wv"])

    def sample(self, n: int, rng: np.random.Generator):
        """Draw ``n`` phase-space points distributed as ``f0 / mass``."""
        x0, x1, v0, v1 = self.support_box()
        gx = np.linspace(x0, x1, 801)
        gv = np.linspace(v0, v1, 801)
        fmax = 1.05 * float(np.max(self(gx[:, None], gv[None, :])))
        xs, vs = [], []
        got = 0
        while got < n:
            m = max(2 * (n - got), 1024)
            x = rng.uniform(x0, x1, m)
            v = rng.uniform(v0, v1, m)
            keep = rng.uniform(0, fmax, m) < self(x, v)
            xs.append(x[keep])
            vs.append(v[keep])
            got += int(keep.sum())
        return np.concatenate(xs)[:n], np.concatenate(vs)[:n]


INIT_DEFAULTS = {
    "two_bumps": dict(mass=1.0, x1=-0.35, x2=0.35, v1=0.3, v2=-0.3, wx=0.25, wv=0.3, frac=0.6),
    "gaussian_product": dict(mass=1.0, x0=0.0, v0=0.0, sx=0.15, sv=0.15, cut=4.0),
    "riemann": dict(mass=1.0, a=0.5, rho_left=1.0, rho_right=0.5, u_left=0.3, u_right=-0.3, wv=0.3),
}


def make_initial(name: str, **params) -> InitialProfile:
    if name not in INIT_DEFAULTS:
        raise ValueError(f"unknown initial profile {name!r}; choose from {sorted(INIT_DEFAULTS)}")
    unknown = set(params) - set(INIT_DEFAULTS[name])
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    full = {**INIT_DEFAULTS[name], **{k: float(v) for k, v in params.items()}}
    for k in ("mass", "wx", "wv", "sx", "sv", "cut", "a"):
        if k in full and full[k] <= 0:
            raise ValueError(f"{name}.{k} must be positive")
    if "frac" in full and not 0 <= full["frac"] <= 1:
        raise ValueError("two_bumps.frac must lie in [0, 1]")
    return InitialProfile(name, full)


def discretize(profile: InitialProfile, grid: Grid, check_support: bool = True) -> PhaseDensity:
    """Sample the profile at cell centres."""
    f = profile(grid.x[:, None], grid.v[None, :])
    pd = PhaseDensity(grid, f)
    if check_support:
        x0, x1, v0, v1 = profile.support_box()
        vlim = grid.Lv - V_BUFFER * grid.dv
        if x0 < -grid.Lx or x1 > grid.Lx or v0 < -vlim or v1 > vlim:
            raise ValueError(f"initial support {profile.support_box()} does not fit the domain "
                             f"(|x| <= {grid.Lx}, |v| <= {vlim} after the velocity buffer)")
    return pd


# ---------------------------------------------------------------------------
# snapshots
#
# CSV: header ``x,v,f`` then one row per cell, x-major (all v for the first x
# cell, then the next x cell).
# Binary: little-endian float64; six header values
# ``Nx, Nv, Lx, Lv, t, outflow`` followed by the Nx*Nv values of f, x-major.

_BIN_HEADER = struct.Struct("<6d")


def save_snapshot(path, pd: PhaseDensity):
    path = Path(path)
    g = pd.grid
    if path.suffix == ".csv":
        X, V = np.meshgrid(g.x, g.v, indexing="ij")
        with open(path, "w", newline="") as fh:
            fh.write("x,v,f\n")
            for xi, vi, fi in zip(X.ravel().tolist(), V.ravel().tolist(), pd.f.ravel().tolist()):
                fh.write(f"{xi!r},{vi!r},{fi!r}\n")
    else:
        with open(path, "wb") as fh:
            fh.write(_BIN_HEADER.pack(g.Nx, g.Nv, g.Lx, g.Lv, pd.t, pd.outflow))
            fh.write(np.ascontiguousarray(pd.f, dtype="<f8").tobytes())


def load_snapshot(path, t: float = 0.0) -> PhaseDensity:
    path = Path(path)
    if path.suffix == ".csv":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xs = np.unique(data[:, 0])
        vs = np.unique(data[:, 1])
        dx = xs[1] - xs[0]
        dv = vs[1] - vs[0]
        grid = Grid(float(xs[-1] + 0.5 * dx), float(vs[-1] + 0.5 * dv), len(xs), len(vs))
        return PhaseDensity(grid, data[:, 2].reshape(len(xs), len(vs)), t)
    raw = path.read_bytes()
    nx, nv, lx, lv, tt, out = _BIN_HEADER.unpack_from(raw)
    grid = Grid(lx, lv, int(nx), int(nv))
    f = np.frombuffer(raw, dtype="<f8", offset=_BIN_HEADER.size).reshape(grid.shape)
    return PhaseDensity(grid, f.copy(), tt, out)
