"""Run configuration files.

Plain ``key = value`` lines under ``[section]`` headers, ``#`` comments.
Every key is validated when the file is read; unknown keys and sections are
errors so a typo never falls back to a default silently.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ParseError, UnknownKey, ValidationError
from .kernels import PROFILES, flat_influence, load_profile_csv, make_influence, make_mollifier
from .kinetic_solver import LIMITERS, SchemeConfig
from .phase_density import INIT_DEFAULTS, ConfinementPotential, Grid, discretize, make_initial


@dataclass
class KernelSection:
    profile: str = "triangle"
    # optional two-column CSV (s, K(s)); overrides ``profile``
    profile_file: str = ""
    r: float = 0.1
    lam: float = 1.0  # written ``lambda`` in files
    beta: float = 1.0
    alignment: bool = True


@dataclass
class PotentialSection:
    kappa: float = 1.0


@dataclass
class GridSection:
    Lx: float = 0.8
    Lv: float = 1.0
    Nx: int = 128
    Nv: int = 128


@dataclass
class TimeSection:
    t_end: float = 1.0
    cfl: float = 0.4
    snapshot_stride: int = 0
    limiter: str = "minmod"
    dt_policy: str = "bound"


@dataclass
class InitSection:
    name: str = "two_bumps"
    params: dict = field(default_factory=dict)


@dataclass
class ParticlesSection:
    n: int = 2000
    seed: int = 0
    dim: int = 1
    dt: float = 0.01
    width: int = 2
    # trajectory rows are written every ``stride`` steps
    stride: int = 10


@dataclass
class SweepSection:
    r_list: tuple = (0.4, 0.2, 0.1, 0.05, 0.0)
    q: float = 1.0
    decrease_factor: float = 1.3
    gap_floor: float = 0.0
    residual_factor: float = 3.0
    slack: float = 0.05
    test_degree: int = 4
    workers: int = 1


@dataclass
class DiagnosticsSection:
    p: float = 2.0


SECTIONS = {
    "kernel": KernelSection,
    "potential": PotentialSection,
    "grid": GridSection,
    "time": TimeSection,
    "init": InitSection,
    "particles": ParticlesSection,
    "sweep": SweepSection,
    "diagnostics": DiagnosticsSection,
}

# file key -> attribute name
_RENAMED = {("kernel", "lambda"): "lam"}


@dataclass
class RunConfig:
    kernel: KernelSection = field(default_factory=KernelSection)
    potential: PotentialSection = field(default_factory=PotentialSection)
    grid: GridSection = field(default_factory=GridSection)
    time: TimeSection = field(default_factory=TimeSection)
    init: InitSection = field(default_factory=InitSection)
    particles: ParticlesSection = field(default_factory=ParticlesSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)

    # -- builders ---------------------------------------------------------

    def make_grid(self) -> Grid:
        g = self.grid
        return Grid(g.Lx, g.Lv, g.Nx, g.Nv)

    def make_initial(self):
        return make_initial(self.init.name, **self.init.params)

    def initial_density(self):
        return discretize(self.make_initial(), self.make_grid())

    def profile(self):
        k = self.kernel
        return load_profile_csv(k.profile_file) if k.profile_file else PROFILES[k.profile]

    def influence(self):
        k = self.kernel
        if k.beta == 0:
            return flat_influence(k.lam)
        return make_influence(k.lam, k.beta)

    def mollifier(self, r: float | None = None, dim: int = 1):
        r = self.kernel.r if r is None else r
        if r == 0 or not self.kernel.alignment:
            return None
        return make_mollifier(self.profile(), r, dim)

    def potential_fn(self) -> ConfinementPotential:
        return ConfinementPotential(self.potential.kappa)

    def scheme(self, r: float | None = None) -> SchemeConfig:
        t = self.time
        return SchemeConfig(t_end=t.t_end, cfl=t.cfl, flux_limiter=t.limiter,
                            snapshot_stride=t.snapshot_stride, phi=self.influence(),
                            mollifier=self.mollifier(r), psi=self.potential_fn(),
                            alignment=self.kernel.alignment, dt_policy=t.dt_policy,
                            p=self.diagnostics.p)

    # -- text form --------------------------------------------------------

    def to_text(self) -> str:
        out = []
        for name in SECTIONS:
            sec = getattr(self, name)
            out.append(f"[{name}]")
            if name == "init":
                out.append(f"name = {sec.name}")
                for k, v in sorted(sec.params.items()):
                    out.append(f"{k} = {_fmt(v)}")
            else:
                for f in fields(sec):
                    key = "lambda" if (name, f.name) == ("kernel", "lam") else f.name
                    out.append(f"{key} = {_fmt(getattr(sec, f.name))}")
            out.append("")
        return "\n".join(out)

    def digest(self) -> str:
        """SHA-256 of the canonical text form."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(float(x)) for x in v)
    return str(v)


# ---------------------------------------------------------------------------
# parsing

_SECTION_RE = re.compile(r"^\s*\[([^\]]*)\]")
_KEY_RE = re.compile(r"^\s*([^=#\s][^=]*?)\s*=")


def _scan_lines(text: str):
    """``(section, key) -> [line numbers]`` from a raw pass over the text."""
    where: dict[tuple[str, str], list[int]] = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        if line.lstrip().startswith("#") or not line.strip():
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, ""), []).append(n)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), []).append(n)
    return where


def _to_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _convert(key: str, raw: str, kind, line=None):
    try:
        if kind is bool:
            return _to_bool(raw)
        if kind is int:
            fv = float(raw)
            if not fv.is_integer():
                raise ValueError
            return int(fv)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind is tuple:
            vals = tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
            if not vals:
                raise ValueError
            return vals
        return raw.strip()
    except ValueError:
        raise ValidationError(key, f"cannot read {raw!r} as {kind.__name__}", line) from None


def _check(cond: bool, key: str, reason: str):
    if not cond:
        raise ValidationError(key, reason)


def validate(cfg: RunConfig):
    """Range checks on a filled config; raises :class:`ValidationError`."""
    k = cfg.kernel
    _check(k.r >= 0, "kernel.r", "must be > 0 or 0 for local mode")
    _check(k.profile in PROFILES, "kernel.profile", f"must be one of {sorted(PROFILES)}")
    _check(k.lam >= 0, "kernel.lambda", "must be >= 0")
    _check(k.beta >= 0, "kernel.beta", "must be >= 0")
    if k.profile_file:
        _check(Path(k.profile_file).is_file(), "kernel.profile_file", "file not found")
    _check(cfg.potential.kappa >= 0, "potential.kappa", "must be >= 0")
    g = cfg.grid
    _check(g.Lx > 0, "grid.Lx", "must be > 0")
    _check(g.Lv > 0, "grid.Lv", "must be > 0")
    _check(g.Nx >= 8, "grid.Nx", "must be >= 8")
    _check(g.Nv >= 8, "grid.Nv", "must be >= 8")
    t = cfg.time
    _check(t.t_end > 0, "time.t_end", "must be > 0")
    _check(0 < t.cfl < 1, "time.cfl", "must lie in (0, 1)")
    _check(t.snapshot_stride >= 0, "time.snapshot_stride", "must be >= 0")
    _check(t.limiter in LIMITERS, "time.limiter", f"must be one of {LIMITERS}")
    _check(t.dt_policy in ("adaptive", "bound"), "time.dt_policy", "must be adaptive or bound")
    name = cfg.init.name
    _check(name in INIT_DEFAULTS, "init.name", f"must be one of {sorted(INIT_DEFAULTS)}")
    for key in cfg.init.params:
        if key not in INIT_DEFAULTS[name]:
            raise UnknownKey(f"init.{key}")
    try:
        cfg.make_initial()
    except ValueError as exc:
        raise ValidationError("init", str(exc)) from None
    p = cfg.particles
    _check(p.n >= 1, "particles.n", "must be >= 1")
    _check(p.seed >= 0, "particles.seed", "must be >= 0")
    _check(p.dim in (1, 2), "particles.dim", "must be 1 or 2")
    _check(p.dt > 0, "particles.dt", "must be > 0")
    _check(p.width >= 2, "particles.width", "must be >= 2 cells")
    _check(p.stride >= 1, "particles.stride", "must be >= 1")
    s = cfg.sweep
    _check(all(r >= 0 for r in s.r_list), "sweep.r_list", "values must be >= 0")
    _check(1 <= s.q < 1.5, "sweep.q", "must lie in [1, 3/2)")
    _check(s.decrease_factor >= 1, "sweep.decrease_factor", "must be >= 1")
    _check(s.gap_floor >= 0, "sweep.gap_floor", "must be >= 0")
    _check(s.residual_factor > 0, "sweep.residual_factor", "must be > 0")
    _check(s.slack >= 0, "sweep.slack", "must be >= 0")
    _check(0 <= s.test_degree <= 8, "sweep.test_degree", "must lie in 0..8")
    _check(s.workers >= 1, "sweep.workers", "must be >= 1")
    _check(cfg.diagnostics.p > 1, "diagnostics.p", "must be > 1")


def parse_config(text: str) -> RunConfig:
    """Parse and validate; the first problem raises with its line number."""
    where = _scan_lines(text)
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                   empty_lines_in_values=False)
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        lines = where.get((exc.section, exc.option.lower()), [])
        first = lines[0] if lines else "?"
        raise ParseError(exc.lineno, f"duplicate key {exc.section}.{exc.option} "
                                     f"(first set on line {first})") from None
    except configparser.DuplicateSectionError as exc:
        lines = where.get((exc.section, ""), [])
        first = lines[0] if lines else "?"
        raise ParseError(exc.lineno, f"duplicate section [{exc.section}] "
                                     f"(first on line {first})") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError(exc.lineno, "key outside any [section]") from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else "?"
        raise ParseError(line, "expected 'key = value' or '[section]'") from None

    cfg = RunConfig()
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise UnknownKey(sec, where.get((sec, ""), [None])[0])
        target = getattr(cfg, sec)
        kinds = {f.name: f.type for f in fields(target)}
        for key, raw in cp.items(sec):
            line = where.get((sec, key), [None])[0]
            if sec == "init":
                if key == "name":
                    target.name = raw.strip()
                else:
                    target.params[key] = _convert(f"init.{key}", raw, float, line)
                continue
            # configparser lowercases keys; attribute names keep their case (Lx, Nv)
            lookup = {n.lower(): n for n in kinds if n not in _RENAMED.values()}
            name = _RENAMED.get((sec, key)) or lookup.get(key)
            if name is None:
                raise UnknownKey(f"{sec}.{key}", line)
            kind = {"str": str, "float": float, "int": int, "bool": bool,
                    "tuple": tuple}[kinds[name]]
            setattr(target, name, _convert(f"{sec}.{name}", raw, kind, line))
    try:
        validate(cfg)
    except (ValidationError, UnknownKey) as exc:
        sec, _, key = exc.key.partition(".")
        key = {"lam": "lambda"}.get(key, key).lower()
        line = where.get((sec, key), [None])[0]
        if isinstance(exc, UnknownKey):
            raise UnknownKey(exc.key, line) from None
        raise ValidationError(exc.key, exc.reason, line) from None
    return cfg


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def shipped_config(name: str) -> Path:
    """Path of a config file shipped with the package (``two_bumps`` etc.)."""
    p = Path(__file__).with_name("configs") / (name if name.endswith(".cfg") else name + ".cfg")
    if not p.is_file():
        raise FileNotFoundError(p)
    return p


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
