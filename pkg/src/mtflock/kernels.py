"""Interaction kernels: the influence function and the scaled mollifier family.

The influence function ``Phi(x) = lam * (1 + |x|^2)^(-beta)`` weights the
Cucker-Smale alignment.  The mollifier ``K^r(x) = r^-d K(x / r)`` weights the
Motsch-Tadmor average; its base profile ``K`` is compactly supported, positive
on the ball of radius ``R1`` and zero outside the ball of radius ``R2``.

Convolutions use the midpoint rule on the solver grid.  Mollifier stencils are
renormalized so their discrete weights sum to one, which keeps constants
exactly invariant and leaves the density ratios of the alignment term
untouched (they are scale free).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainMismatch, UnresolvedKernel, VacuumRatio

# stencils must cover at least this many cells on each side
MIN_CELLS = 4


@dataclass(frozen=True)
class InfluenceKernel:
    lam: float
    beta: float

    def radial(self, s):
        s = np.asarray(s, dtype=float)
        if self.beta == 0.0:
            return np.full_like(s, self.lam)
        if self.beta == 1.0:
            return self.lam / (1.0 + s * s)
        return self.lam * (1.0 + s * s) ** (-self.beta)

    def __call__(self, x):
        return self.radial(np.abs(np.asarray(x, dtype=float)))

    @property
    def sup_norm(self) -> float:
        return float(self.lam)

    @property
    def is_zero(self) -> bool:
        return self.lam == 0.0


def make_influence(lam: float, beta: float) -> InfluenceKernel:
    lam = float(lam)
    beta = float(beta)
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"influence strength must be finite and >= 0, got {lam}")
    if not math.isfinite(beta) or beta <= 0:
        raise ValueError(f"decay exponent must be finite and > 0, got {beta}")
    return InfluenceKernel(lam, beta)


def flat_influence(lam: float) -> InfluenceKernel:
    """Constant kernel ``Phi == lam`` (the ``beta -> 0`` limit)."""
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"influence strength must be finite and >= 0, got {lam}")
    return InfluenceKernel(lam, 0.0)


# ---------------------------------------------------------------------------
# base profiles


def _triangle(s):
    return np.clip(1.0 - s, 0.0, None)


def _bump2(s):
    return np.clip(1.0 - s * s, 0.0, None) ** 2


def _cosine(s):
    return np.where(s < 1.0, 0.5 * (1.0 + np.cos(np.pi * np.minimum(s, 1.0))), 0.0)


@dataclass(frozen=True)
class Profile:
    """Unnormalized radial base shape ``K(|x|)`` on the unit scale."""

    name: str
    shape: Callable = field(repr=False, compare=False)
    R1: float
    R2: float
    # breakpoints of a tabulated profile (radial coordinate, values)
    nodes: tuple | None = field(default=None, repr=False, compare=False)
    # closed-form integrals over R^1 and R^2, when known
    masses: tuple | None = field(default=None, repr=False, compare=False)

    def __call__(self, s):
        return self.shape(np.abs(np.asarray(s, dtype=float)))

    def scaled(self, alpha: float, beta: float) -> "Profile":
        """The profile ``alpha * K(beta * x)``."""
        base = self.shape
        nodes = None
        if self.nodes is not None:
            nodes = (tuple(np.asarray(self.nodes[0]) / beta),
                     tuple(alpha * np.asarray(self.nodes[1])))
        masses = None
        if self.masses is not None:
            masses = tuple(alpha * mass / beta ** (d + 1) for d, mass in enumerate(self.masses))
        return Profile(f"{self.name}*{alpha:g}({beta:g}x)",
                       lambda s: alpha * base(beta * s),
                       self.R1 / beta, self.R2 / beta, nodes, masses)

    def integral(self, dim: int) -> float:
        """``int K(|x|) dx`` over R^dim."""
        if self.masses is not None and dim in (1, 2):
            return self.masses[dim - 1]
        if self.nodes is not None:
            s, k = (np.asarray(a) for a in self.nodes)
            if dim != 1:
                raise ValueError("tabulated profiles are one-dimensional")
            # exact for the piecewise-linear interpolant
            return 2.0 * float(np.sum(0.5 * (k[1:] + k[:-1]) * np.diff(s)))
        pts = [self.R1]
        if dim == 1:
            val, _ = integrate.quad(lambda s: float(self(s)), 0.0, self.R2,
                                    points=pts, epsabs=1e-14, epsrel=1e-13, limit=200)
            return 2.0 * val
        if dim == 2:
            val, _ = integrate.quad(lambda s: float(self(s)) * s, 0.0, self.R2,
                                    points=pts, epsabs=1e-14, epsrel=1e-13, limit=200)
            return 2.0 * np.pi * val
        raise ValueError(f"dimension must be 1 or 2, got {dim}")

    def sup_inf(self, n: int = 20001) -> tuple[float, float]:
        """(sup over the closed R2-ball, inf over the closed R1-ball)."""
        s_out = np.linspace(0.0, self.R2, n)
        s_in = np.linspace(0.0, self.R1, n)
        if self.nodes is not None:
            nodes = np.asarray(self.nodes[0])
            s_out = np.union1d(s_out, nodes[nodes <= self.R2])
            s_in = np.union1d(s_in, nodes[nodes <= self.R1])
        return float(np.max(self(s_out))), float(np.min(self(s_in)))


PROFILES = {
    "triangle": Profile("triangle", _triangle, 0.5, 1.0, masses=(1.0, math.pi / 3)),
    "bump2": Profile("bump2", _bump2, math.sqrt(1.0 - 1.0 / math.sqrt(2.0)), 1.0,
                     masses=(16.0 / 15.0, math.pi / 3)),
    "cosine": Profile("cosine", _cosine, 0.5, 1.0, masses=(1.0, math.pi / 2 - 2.0 / math.pi)),
}


def load_profile_csv(path) -> Profile:
    """Read a tabulated radial profile from a two-column ``x, K(x)`` CSV.

    Negative abscissae are folded onto ``|x|``; the table must start at 0,
    end with a zero value, and be positive at the origin.
    """
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                # header line
                continue
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two table rows")
    tab = np.array(sorted({(abs(x), k) for x, k in rows}))
    s, k = tab[:, 0], tab[:, 1]
    if np.any(np.diff(s) <= 0):
        raise ValueError(f"{path}: conflicting values for the same |x|")
    if s[0] != 0.0:
        raise ValueError(f"{path}: table must contain x = 0")
    if np.any(k < 0):
        raise ValueError(f"{path}: negative kernel values")
    if k[-1] != 0.0:
        raise ValueError(f"{path}: kernel must vanish at the end of the table (bounded support)")
    if k[0] <= 0:
        raise ValueError(f"{path}: K(0) must be positive")
    nz = np.nonzero(k > 0)[0]
    R2 = float(s[nz[-1] + 1])

    def shape(q, s=s, k=k):
        return np.interp(q, s, k, right=0.0)

    # first crossing of half the peak
    half = 0.5 * k[0]
    i = int(np.argmax(k <= half))
    R1 = float(s[i - 1] + (s[i] - s[i - 1]) * (k[i - 1] - half) / (k[i - 1] - k[i]))
    if not np.all(k[: i] > 0):
        raise ValueError(f"{path}: kernel must be positive on a ball around 0")
    return Profile(path.stem, shape, R1, R2, (tuple(s), tuple(k)))


@dataclass(frozen=True)
class Mollifier:
    profile: Profile
    r: float
    dim: int = 1
    # 1 / int K, so that int K^r = 1
    norm: float = 1.0

    @property
    def R1(self) -> float:
        return self.profile.R1

    @property
    def R2(self) -> float:
        return self.profile.R2

    @property
    def support_radius(self) -> float:
        return self.profile.R2 * self.r

    def radial(self, s):
        s = np.asarray(s, dtype=float)
        return self.norm * self.r ** (-self.dim) * self.profile(s / self.r)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return self.radial(np.abs(x))
        return self.radial(np.linalg.norm(x, axis=-1))

    def discrete_factor(self, dx: float) -> float:
        """Factor making the midpoint weights ``K^r(k dx) dx`` sum to one."""
        _check_resolved(self, dx)
        w = int(math.ceil(self.support_radius / dx))
        k = np.arange(-w, w + 1) * dx
        return 1.0 / float(np.sum(self(k)) * dx)


def make_mollifier(profile, r: float, dim: int = 1) -> Mollifier:
    if isinstance(profile, str):
        try:
            profile = PROFILES[profile]
        except KeyError:
            raise ValueError(f"unknown mollifier profile {profile!r}; "
                             f"choose from {sorted(PROFILES)} or load a CSV table") from None
    r = float(r)
    if not math.isfinite(r) or r <= 0:
        raise ValueError(f"mollifier radius must be > 0, got {r}")
    if dim not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dim}")
    if not (0 < profile.R1 < profile.R2 < math.inf):
        raise ValueError("profile needs 0 < R1 < R2 < inf (bounded support)")
    if float(profile(0.0)) <= 0:
        raise ValueError("profile must satisfy K(0) > 0")
    if float(profile(np.array(profile.R1))) <= 0:
        raise ValueError("profile must be positive on the R1-ball")
    return Mollifier(profile, r, dim, 1.0 / profile.integral(dim))


# ---------------------------------------------------------------------------
# convolution


def _check_resolved(m: Mollifier, dx: float):
    if m.support_radius < MIN_CELLS * dx * (1.0 - 1e-12):
        raise UnresolvedKernel(
            f"support radius r*R2 = {m.support_radius:g} is below {MIN_CELLS} cells "
            f"(dx = {dx:g}); refine the grid or increase r")


def _grid_spacing(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) != n:
        raise DomainMismatch(f"grid has {x.size} points, grid function has {n}")
    if n < 2:
        raise DomainMismatch("grid needs at least two cells")
    dx = x[1] - x[0]
    if dx <= 0 or not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0):
        raise DomainMismatch("convolution needs a uniform increasing grid")
    return float(dx)


def stencil(kernel, dx: float, n: int):
    """Midpoint weights ``w_k`` for offsets ``k = -W..W``."""
    if isinstance(kernel, Mollifier):
        _check_resolved(kernel, dx)
        half = int(math.ceil(kernel.support_radius / dx))
        w = kernel(np.arange(-half, half + 1) * dx) * dx
        return w / w.sum()
    half = n - 1
    return kernel(np.arange(-half, half + 1) * dx) * dx


def convolve(kernel, g, x):
    """``(kernel * g)(x_i) = sum_k kernel(x_i - x_k) g_k dx`` on a uniform grid.

    Compactly supported kernels only visit the cells inside their support.
    Cells outside the grid count as zero.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    dx = _grid_spacing(x, n)
    w = stencil(kernel, dx, n)
    half = (len(w) - 1) // 2
    if g.ndim == 1:
        return np.convolve(g, w)[half:half + n]
    return np.stack([np.convolve(row, w)[half:half + n] for row in g.reshape(-1, n)]).reshape(g.shape)


# ---------------------------------------------------------------------------
# the uniform Motsch-Tadmor constant


def covering_centers(R1: float, R2: float, dim: int):
    """Lattice of radius-R1/2 balls covering the open R2-ball.

    Cubes of side ``R1 / sqrt(dim)`` have circumradius ``R1 / 2``; every cube
    meeting the R2-ball is kept.  The centred and the half-shifted lattices are
    both tried and the smaller covering returned.
    """
    a = R1 / math.sqrt(dim)
    best = None
    for shift in (0.0, 0.5):
        kmax = int(math.ceil(R2 / a)) + 1
        ks = np.arange(-kmax, kmax + 1) + shift
        centers = np.array(list(itertools.product(ks, repeat=dim))) * a
        gap = np.clip(np.abs(centers) - 0.5 * a, 0.0, None)
        keep = np.sqrt(np.sum(gap * gap, axis=1)) < R2
        sel = centers[keep]
        if best is None or len(sel) < len(best):
            best = sel
    return best


def covering_number(R1: float, R2: float, dim: int) -> int:
    return len(covering_centers(R1, R2, dim))


def mt_bound_constant(m: Mollifier) -> float:
    """``sup K / inf_{B_R1} K * N_cover``; depends only on the base profile."""
    sup_k, inf_k = m.profile.sup_inf()
    return sup_k / inf_k * covering_number(m.R1, m.R2, m.dim)


def _density_ratio(m: Mollifier, rho, x):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    rho_t = convolve(m, rho, x)
    pos = rho > 0
    if np.any(rho_t[pos] <= 0):
        raise VacuumRatio("weighted density vanished on the support of rho; "
                          "the grid does not resolve the mollifier")
    ratio = np.zeros_like(rho)
    ratio[pos] = rho[pos] / rho_t[pos]
    return ratio


def mt_ratio_integral(m: Mollifier, rho, x, y: float) -> float:
    """``int K^r(x - y) rho(x) / (K^r * rho)(x) dx`` by midpoint quadrature."""
    x = np.asarray(x, dtype=float)
    ratio = _density_ratio(m, rho, x)
    dx = _grid_spacing(x, len(ratio))
    w = m(x - y) * dx * m.discrete_factor(dx)
    return float(np.sum(w * ratio))


def mt_ratio_sup(m: Mollifier, rho, x) -> float:
    """Maximum of :func:`mt_ratio_integral` over grid points ``y``."""
    ratio = _density_ratio(m, rho, x)
    return float(np.max(convolve(m, ratio, x)))
