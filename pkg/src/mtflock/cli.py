"""Command line entry point: ``mtflock {kinetic,particles,sweep,check}``.

Every subcommand reads a config file and writes CSV tables plus a
``manifest.json`` into ``--out``.  Exit codes: 0 ok, 1 a check failed,
2 usage or config error, 3 runtime abort.  Failures also print one CSV line
``error,<kind>,<exit code>,<message>`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, MTFlockError
from .kinetic_solver import run
from .limit_lab import CheckResult, SweepRow, TestFunctionSet, check_suite, r_sweep
from .particle_solver import ParticleModel, sample_ensemble
from .phase_density import DiagnosticsRow, save_snapshot


def _fmt(v) -> str:
    # repr round-trips floats exactly, which keeps outputs byte-stable
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path, data):
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_table(path, columns, rows):
    write_atomic(path, csv_text(columns, rows))


def _save_snapshot_atomic(path, pd):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=path.suffix)
    os.close(fd)
    try:
        save_snapshot(tmp, pd)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_manifest(out: Path, command: str, cfg: RunConfig, wall: float, status: int,
                   artifacts):
    data = {
        "command": command,
        "version": __version__,
        "config_sha256": cfg.digest(),
        "wall_time_s": round(wall, 6),
        "exit_status": status,
        "artifacts": sorted(artifacts),
    }
    write_atomic(out / "manifest.json", json.dumps(data, indent=2) + "\n")


def _diag_rows(rows: list[DiagnosticsRow]):
    return [r.values() for r in rows]


# ---------------------------------------------------------------------------
# subcommands; each returns (exit status, artifact names)


def cmd_kinetic(cfg: RunConfig, out: Path, args):
    pd0 = cfg.initial_density()
    scheme = cfg.scheme()
    try:
        res = run(pd0, scheme)
    except MTFlockError as exc:
        # flush what was computed before the abort
        write_table(out / "diagnostics.csv", DiagnosticsRow.columns(),
                    _diag_rows(getattr(exc, "rows", [])))
        raise
    names = ["diagnostics.csv"]
    write_table(out / "diagnostics.csv", DiagnosticsRow.columns(), _diag_rows(res.rows))
    snaps = res.snapshots or [res.final]
    for k, pd in enumerate(snaps):
        name = f"snapshot_{k:04d}.bin"
        _save_snapshot_atomic(out / name, pd)
        names.append(name)
    return 0, names


def cmd_particles(cfg: RunConfig, out: Path, args):
    p = cfg.particles
    dim = p.dim
    ens = sample_ensemble(cfg.make_initial(), p.n, p.seed)
    if dim == 2:
        # the 1D profile in each coordinate with an independent draw for the second
        other = sample_ensemble(cfg.make_initial(), p.n, p.seed + 1)
        ens = type(ens)(np.column_stack([ens.x[:, 0], other.x[:, 0]]),
                        np.column_stack([ens.v[:, 0], other.v[:, 0]]), ens.m)
    model = ParticleModel(cfg.influence(), cfg.mollifier(dim=dim), cfg.potential_fn())
    grid = cfg.make_grid() if dim == 1 else None
    diag, traj = [], []
    count = [0]

    def watch(e):
        if count[0] % p.stride == 0 or e.t >= cfg.time.t_end * (1 - 1e-12):
            diag.append(model.diagnostics(e, grid, p.width, cfg.diagnostics.p).values())
            for i in range(e.n):
                traj.append((e.t, i, *e.x[i], *e.v[i]))
        count[0] += 1

    model.run(ens, cfg.time.t_end, p.dt, watch)
    cols = ("t", "i", "x", "v") if dim == 1 else ("t", "i", "x1", "x2", "v1", "v2")
    write_table(out / "trajectory.csv", cols, traj)
    write_table(out / "diagnostics.csv", DiagnosticsRow.columns(), diag)
    return 0, ["trajectory.csv", "diagnostics.csv"]


def _parse_r_list(text):
    try:
        vals = [float(s) for s in text.replace(";", ",").split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--r expects comma separated numbers, got {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise ConfigError("--r values must be >= 0")
    return vals


def cmd_sweep(cfg: RunConfig, out: Path, args):
    s = cfg.sweep
    r_list = _parse_r_list(args.r) if args.r else list(s.r_list)
    pd0 = cfg.initial_density()
    scheme = cfg.scheme(r=0.0)
    phis = TestFunctionSet(pd0.grid, cfg.time.t_end, s.test_degree)
    try:
        rep = r_sweep(pd0, scheme, r_list, cfg.profile(), phis, s.q, s.workers)
    except MTFlockError as exc:
        part = getattr(exc, "report", None)
        if part is not None:
            write_table(out / "sweep.csv", SweepRow.columns(), [r.values() for r in part.rows])
        raise
    write_table(out / "sweep.csv", SweepRow.columns(), [r.values() for r in rep.rows])
    checks = []
    for col in ("l1_rho_gap", "l1_j_gap", "product_gap"):
        fac = rep.halving_factors(col)
        worst = min((f for _, f in fac), default=math.inf)
        checks.append(CheckResult(f"{col}_halving", rep.halving_ok(col, s.decrease_factor,
                                                                 s.gap_floor),
                                  worst - s.decrease_factor,
                                  "; ".join(f"r={r:g}: x{f:.3g}" for r, f in fac)))
        checks.append(CheckResult(f"{col}_monotone", rep.monotone(col, s.slack), math.nan,
                                  f"slack {s.slack:g}"))
    mt = rep.column("mt_sup")
    mt = mt[np.isfinite(mt)]
    top = float(mt.max()) if mt.size else 0.0
    checks.append(CheckResult("mt_uniform_constant", rep.mt_uniform(), rep.mt_constant - top,
                              f"max sup ratio {top:.4g} vs C = {rep.mt_constant:g}"))
    pos = [r for r in rep.rows if r.r > 0]
    if pos:
        lim = s.residual_factor * rep.reference_residual
        checks.append(CheckResult("smallest_r_product_gap", rep.smallest_r_product_ok(
            s.residual_factor), lim - pos[-1].product_gap,
            f"gap {pos[-1].product_gap:.3e} vs {s.residual_factor:g} x residual "
            f"{rep.reference_residual:.3e}"))
    for row in rep.rows:
        checks.append(CheckResult(f"energy_r{row.r:g}", row.energy_margin >= 0,
                                  row.energy_margin))
    write_table(out / "check.csv", CheckResult.columns(), [c.values() for c in checks])
    status = 0 if all(c.passed for c in checks) else 1
    return status, ["sweep.csv", "check.csv"]


def cmd_check(cfg: RunConfig, out: Path, args):
    pd0 = cfg.initial_density()
    phis = TestFunctionSet(pd0.grid, cfg.time.t_end, cfg.sweep.test_degree)
    checks = check_suite(pd0, cfg.scheme(), phis)
    write_table(out / "check.csv", CheckResult.columns(), [c.values() for c in checks])
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<24} {c.detail}")
    return (0 if all(c.passed for c in checks) else 1), ["check.csv"]


COMMANDS = {
    "kinetic": (cmd_kinetic, "run the kinetic solver; writes diagnostics.csv and snapshots"),
    "particles": (cmd_particles, "run the agent system; writes trajectory.csv and diagnostics.csv"),
    "sweep": (cmd_sweep, "r -> 0 sweep against the local-alignment run; writes sweep.csv and check.csv"),
    "check": (cmd_check, "run every estimate check on one configuration; writes check.csv"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtflock", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    ap.commands = {}
    for name, (_, help_text) in COMMANDS.items():
        sp = ap.commands[name] = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="configuration file")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        if name == "sweep":
            sp.add_argument("--r", help='comma separated r values, e.g. "0.4,0.2,0.1,0.05,0"')
    return ap


def _error_line(exc: BaseException, code: int) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(["error", type(exc).__name__, code, str(exc)])
    return buf.getvalue()


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    cfg_path = Path(args.config)
    if not cfg_path.is_file():
        ap.commands[args.command].print_usage(sys.stderr)
        exc = FileNotFoundError(f"config file not found: {cfg_path}")
        print(_error_line(exc, 2), file=sys.stderr)
        return 2
    cfg = None
    t0 = time.perf_counter()
    try:
        cfg = load_config(cfg_path)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        status, names = COMMANDS[args.command][0](cfg, out, args)
    except (MTFlockError, ValueError, OSError) as exc:
        # plain ValueErrors come from building the run (e.g. data outside the domain)
        code = getattr(exc, "exit_code", 2)
        print(_error_line(exc, code), file=sys.stderr)
        if cfg is not None and Path(args.out).is_dir():
            write_manifest(Path(args.out), args.command, cfg, time.perf_counter() - t0, code, [])
        return code
    write_manifest(out, args.command, cfg, time.perf_counter() - t0, status, names)
    return status


if __name__ == "__main__":
    sys.exit(main())
