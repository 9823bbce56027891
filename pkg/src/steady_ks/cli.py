"""Command-line front end: ``steady-ks <subcommand> [options]``.

Exit codes: 0 success, 1 a verification reported a violation, 2 usage or numerical
failure. Defaults for solver and optimiser tolerances can come from a TOML file given
by --config or the STEADY_KS_CONFIG environment variable; flags override it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .ball_minimizer import MinimizeOptions, minimize, mu_curve
from .free_energy import RadialDensity, energy
from .lane_emden import (
    CriticalCaseError,
    ProfileError,
    ProfileParams,
    RadialProfile,
    Tolerances,
    check_regime,
    solve_profile,
)
from .obstacle import boundary_flatness, verify_obstacle
from .phase_plane import barrier_epsilon, check_invariants, fixed_points, to_phase
from .scaling import alpha_of_mass, canonical_profile

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SUBCOMMANDS = ("profile", "mass-map", "phase", "energy", "verify", "minimize", "mu-curve")
CONFIG_ENV = "STEADY_KS_CONFIG"
SOLVE_FROM_ALPHA = ("profile", "phase", "energy", "verify")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class Command:
    subcommand: str
    N: int | None = None
    m: float | None = None
    alpha: float | None = None
    mass: float | None = None
    alphas: tuple[float, ...] = ()
    radius: float | None = None
    radii: tuple[float, ...] = ()
    cells: int = 512
    delta: float | None = None
    jobs: int = 1
    fmt: str = "json"
    input: Path | None = None
    output: Path | None = None
    report: Path | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    minimize_opts: MinimizeOptions = field(default_factory=MinimizeOptions)


# -- parsing -----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _number_list(text: str) -> tuple[float, ...]:
    return tuple(_number(t) for t in text.split(",") if t.strip())


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="steady-ks", description="Stationary states of the diffusion-dominated Keller-Segel model")
    sub = parser.add_subparsers(dest="subcommand", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True

    def common(p, needs_params=True):
        p.add_argument("--N", type=int, required=needs_params, help="space dimension (>= 3)")
        p.add_argument("--m", type=_number, required=needs_params, help="diffusion exponent, e.g. 2 or 4/3")
        p.add_argument("--output", "-o", type=Path, help="output file (default: stdout)")
        p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
        p.add_argument("--config", type=Path, help=f"TOML defaults (else ${CONFIG_ENV})")

    def central(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--alpha", type=_number, help="central value psi(0)")
        g.add_argument("--mass", type=_number, help="total mass M (alpha is solved for)")

    p = sub.add_parser("profile", help="solve the Lane-Emden profile")
    common(p)
    central(p)
    p.add_argument("--points", type=int, help="resampled grid size")

    p = sub.add_parser("mass-map", help="tabulate alpha -> (R*, M)")
    common(p)
    p.add_argument("--alphas", type=_number_list, default=(0.5, 1.0, 2.0))

    p = sub.add_parser("phase", help="phase-plane path, fixed points and invariants")
    common(p)
    central(p)
    p.add_argument("--report", type=Path, help="where to write the JSON fixed-point report in CSV mode")

    for name, text in (("energy", "free energy of a profile"), ("verify", "obstacle-problem check")):
        p = sub.add_parser(name, help=text)
        common(p, needs_params=False)
        central(p)
        p.add_argument("--input", "-i", type=Path, help="profile JSON or CSV (CSV needs --N and --m)")
        if name == "verify":
            p.add_argument("--delta", type=_number, help="also check boundary flatness for this delta > 0")

    p = sub.add_parser("minimize", help="minimise the discrete free energy in a ball")
    common(p)
    p.add_argument("--mass", type=_number, required=True)
    p.add_argument("--radius", type=_number, required=True)
    p.add_argument("--cells", type=int)
    p.add_argument("--tol", type=_number)
    p.add_argument("--report", type=Path, help="where to write the density CSV r,rho in JSON mode")

    p = sub.add_parser("mu-curve", help="discrete mu_{M,R} over increasing radii")
    common(p)
    p.add_argument("--mass", type=_number, required=True)
    p.add_argument("--radii", type=_number_list, required=True)
    p.add_argument("--cells", type=int)
    p.add_argument("--tol", type=_number)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _load_config(path: Path | None) -> dict:
    if path is None:
        env = os.environ.get(CONFIG_ENV)
        path = Path(env) if env else None
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}") from None


def _apply_config(cfg: dict):
    tol_keys = {"rtol", "atol_scale", "root_tol", "n_points", "safety", "max_step_fraction"}
    min_keys = {"tol", "patience", "kkt_tol", "max_iter"}
    tol_cfg = cfg.get("tolerances", {})
    min_cfg = cfg.get("minimize", {})
    for section, allowed, values in (("tolerances", tol_keys, tol_cfg), ("minimize", min_keys | {"cells"}, min_cfg)):
        unknown = set(values) - allowed
        if unknown:
            raise UsageError(f"--config: unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    tols = replace(Tolerances(), **tol_cfg)
    opts = replace(MinimizeOptions(), **{k: v for k, v in min_cfg.items() if k != "cells"})
    return tols, opts, min_cfg.get("cells")


def _validate_params(N, m):
    if N is None or m is None:
        return
    if N < 3:
        raise UsageError(f"--N: dimension must be at least 3, got {N}")
    try:
        check_regime(N, m)
    except CriticalCaseError:
        raise
    except ValueError as exc:
        raise UsageError(f"--m: {exc}") from None


def _positive(name, value):
    if value is not None and not value > 0:
        raise UsageError(f"{name}: must be positive, got {value}")


def parse(argv) -> Command:
    """Validate arguments into a Command; raises UsageError or CriticalCaseError."""
    ns = _build_parser().parse_args(list(argv))
    tols, opts, cfg_cells = _apply_config(_load_config(ns.config))
    N, m = ns.N, ns.m
    _validate_params(N, m)

    alpha = getattr(ns, "alpha", None)
    mass = getattr(ns, "mass", None)
    _positive("--alpha", alpha)
    _positive("--mass", mass)
    if getattr(ns, "points", None) is not None:
        if ns.points < 16:
            raise UsageError("--points: need at least 16 grid points")
        tols = replace(tols, n_points=ns.points)
    if getattr(ns, "tol", None) is not None:
        _positive("--tol", ns.tol)
        opts = replace(opts, tol=ns.tol)
    cells = getattr(ns, "cells", None) or cfg_cells or 512
    if cells < 16:
        raise UsageError("--cells: need at least 16 cells")
    radius = getattr(ns, "radius", None)
    _positive("--radius", radius)
    radii = tuple(getattr(ns, "radii", ()) or ())
    if radii and (any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:]))):
        raise UsageError("--radii: need positive, strictly increasing radii")
    alphas = tuple(getattr(ns, "alphas", ()) or ())
    if any(a <= 0 for a in alphas):
        raise UsageError("--alphas: central values must be positive")
    delta = getattr(ns, "delta", None)
    _positive("--delta", delta)
    jobs = getattr(ns, "jobs", 1) or 1
    if jobs < 1:
        raise UsageError("--jobs: must be at least 1")
    inp = getattr(ns, "input", None)

    if ns.subcommand in ("profile", "phase") and alpha is None and mass is None:
        raise UsageError("--alpha/--mass: one of them is required")
    if ns.subcommand in ("energy", "verify"):
        if inp is None and (N is None or m is None or (alpha is None and mass is None)):
            raise UsageError("--input: give a profile file, or --N, --m and --alpha/--mass to solve one")
        if inp is not None and inp.suffix.lower() == ".csv" and (N is None or m is None):
            raise UsageError("--input: CSV profiles need --N and --m")

    if ns.subcommand in SOLVE_FROM_ALPHA and mass is not None and inp is None:
        alpha = alpha_of_mass(N, m, mass, tols)

    return Command(
        subcommand=ns.subcommand,
        N=N,
        m=m,
        alpha=alpha,
        mass=mass,
        alphas=alphas,
        radius=radius,
        radii=radii,
        cells=int(cells),
        delta=delta,
        jobs=int(jobs),
        fmt=ns.fmt,
        input=inp,
        output=ns.output,
        report=getattr(ns, "report", None),
        tolerances=tols,
        minimize_opts=opts,
    )


# -- output helpers --------------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """JSON with insertion-ordered keys and shortest round-trip floats."""
    return json.dumps(_plain(obj), indent=2) + "\n"


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(x)) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _write(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- execution ---------------------------------------------------------------------------


def _profile_for(cmd: Command) -> RadialProfile:
    if cmd.input is not None:
        return RadialProfile.load(cmd.input, cmd.N, cmd.m)
    return solve_profile(ProfileParams(cmd.N, cmd.m, cmd.alpha), cmd.tolerances)


def _run_profile(cmd: Command) -> int:
    prof = _profile_for(cmd)
    text = prof.to_csv() if cmd.fmt == "csv" else dumps(prof.to_dict())
    _write(cmd.output, text)
    return 0


def _run_mass_map(cmd: Command) -> int:
    mm = canonical_profile(cmd.N, cmd.m, cmd.tolerances)
    rows = [(a, mm.r_star(a), mm.mass(a)) for a in cmd.alphas]
    if cmd.fmt == "csv":
        _write(cmd.output, _csv(("alpha", "r_star", "mass"), rows))
    else:
        data = {
            "N": cmd.N,
            "m": cmd.m,
            "mu": mm.law.mu,
            "mass_exponent": mm.law.mass_exponent,
            "M1_of_1": mm.M1_of_1,
            "rows": [{"alpha": a, "r_star": r, "mass": M} for a, r, M in rows],
        }
        _write(cmd.output, dumps(data))
    return 0


def _run_phase(cmd: Command) -> int:
    prof = _profile_for(cmd)
    path = to_phase(prof)
    fp = fixed_points(cmd.N, cmd.m)
    inv = check_invariants(path, cmd.N, cmd.m)
    z = barrier_epsilon(cmd.N, cmd.m).z(path.u)
    report = {"fixed_points": fp.to_dict(), "invariants": inv.to_dict()}
    if cmd.fmt == "csv":
        _write(cmd.output, _csv(("s", "u", "v", "z_eps"), zip(path.s, path.u, path.v, z)))
        if cmd.report is not None:
            _write(cmd.report, dumps(report))
    else:
        report["path"] = {"s": path.s, "u": path.u, "v": path.v, "z_eps": z}
        _write(cmd.output, dumps(report))
    return 0 if inv.passed and inv.diverged else 1


def _run_energy(cmd: Command) -> int:
    prof = _profile_for(cmd)
    rep = energy(RadialDensity.from_profile(prof), prof.params.m)
    data = {
        "mass": rep.mass,
        "entropy": rep.entropy,
        "interaction": rep.interaction,
        "total": rep.total,
        "lower_bound": rep.lower_bound,
        "above_bound": rep.above_bound,
    }
    _write(cmd.output, dumps(data))
    return 0 if rep.above_bound else 1


def _run_verify(cmd: Command) -> int:
    try:
        prof = _profile_for(cmd)
        if prof.params.N < 3:
            raise ValueError(f"dimension {prof.params.N} is below 3")
        check_regime(prof.params.N, prof.params.m)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        _write(cmd.output, dumps({"passed": False, "violations": [f"cannot read profile: {exc}"]}))
        return 1
    rep = verify_obstacle(prof)
    data = rep.to_dict()
    ok = rep.passed
    if cmd.delta is not None:
        flat = boundary_flatness(prof, cmd.delta)
        data["flatness"] = flat.to_dict()
        ok = ok and flat.passed
        data["passed"] = ok
    _write(cmd.output, dumps(data))
    return 0 if ok else 1


def _run_minimize(cmd: Command) -> int:
    res = minimize(cmd.N, cmd.m, cmd.mass, cmd.radius, cmd.cells, cmd.minimize_opts)
    if cmd.fmt == "csv":
        _write(cmd.output, res.density.to_csv())
    else:
        _write(cmd.output, dumps(res.to_dict()))
        if cmd.report is not None:
            _write(cmd.report, res.density.to_csv())
    ok = res.converged and res.energy >= res.lower_bound
    return 0 if ok else 1


def _run_mu_curve(cmd: Command) -> int:
    curve = mu_curve(cmd.N, cmd.m, cmd.mass, cmd.radii, cmd.cells, cmd.minimize_opts, jobs=cmd.jobs)
    if cmd.fmt == "csv":
        _write(cmd.output, curve.to_csv())
    else:
        data = {
            "radii": curve.radii,
            "cells": curve.cells,
            "mu": curve.energies,
            "converged": curve.converged,
            "nonincreasing": curve.nonincreasing,
        }
        _write(cmd.output, dumps(data))
    return 0 if curve.nonincreasing and all(curve.converged) else 1


_DISPATCH = {
    "profile": _run_profile,
    "mass-map": _run_mass_map,
    "phase": _run_phase,
    "energy": _run_energy,
    "verify": _run_verify,
    "minimize": _run_minimize,
    "mu-curve": _run_mu_curve,
}


def execute(cmd: Command) -> int:
    try:
        return _DISPATCH[cmd.subcommand](cmd)
    except (ProfileError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"steady-ks: numerical failure: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse(argv)
    except CriticalCaseError as exc:
        print(f"steady-ks: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"steady-ks: usage error: {exc}", file=sys.stderr)
        return 2
    try:
        return execute(cmd)
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return 0


if __name__ == "__main__":
    raise SystemExit(main())


__all__ = ["Command", "UsageError", "dumps", "execute", "main", "parse"]
