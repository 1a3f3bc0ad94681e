"""Command-line front end: ``dwell4 <command> [--config file.json] [flags]``.

Every command accepts a JSON config whose keys mirror the long flags
(dashes become underscores); flags given on the command line win.  Unknown
config keys are rejected.  Files written to ``--out`` are accompanied by a
``manifest.json`` with the resolved config, its hash, solver settings and the
package version.  No timestamps are recorded so reruns are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    IntegratorConfig,
    Termination,
    integrate,
    phase_portrait,
    poincare_section,
    write_section_csv,
)
from .eigensolver import CoefficientCache, ModelParams, PotentialSpec, model_params, solve_integrals
from .errors import ConfigError, Dwell4Error
from .fixed_points import (
    analytic_fixed_points,
    critical_imbalance,
    effective_fixed_points,
    pitchfork_points,
    write_effective_csv,
    write_fixed_points_csv,
)
from .model import STATE_FIELDS, PendulumState, classify_regime
from .regime_map import SweepGrid, boundary_curves, sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_POTENTIAL = {"v0": None, "gamma": None, "params": None, "domain_halfwidth": 1.5,
              "grid_points": 512, "stencil_order": 8, "cache": True}

SCHEMAS = {
    "coefficients": {**_POTENTIAL},
    "simulate": {**_POTENTIAL, "initial": None, "integrator": {}, "model": None, "t_end": None,
                 "sample_interval": None},
    "fixed-points": {**_POTENTIAL, "z2": 0.0, "scan_z0": None, "n_intervals": 1000},
    "regime-map": {"grid": {}, "marked": True, "cache": True},
    "portrait": {**_POTENTIAL, "z2": 0.0, "z0": 0.0, "theta0": 0.0, "plane": ["z1", "theta1"],
                 "z_values": "-0.45:0.45:10", "theta_values": [0.0, math.pi], "random": 0, "seed": 0,
                 "integrator": {}, "model": None, "t_end": None, "sample_interval": None},
    "poincare": {**_POTENTIAL, "initial": None, "integrator": {}, "model": None, "t_end": None,
                 "sample_interval": None, "section": ["theta0", 0.0], "direction": 1,
                 "plane": ["z1", "theta1"]},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_CONFIG, "UsageError", message)


def _fail(code: int, kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    sys.exit(code)


# ----------------------------------------------------------------------------
# config plumbing


def resolve_config(command: str, path: str | None, overrides: dict) -> dict:
    schema = SCHEMAS[command]
    cfg = json.loads(json.dumps(schema))
    if path:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(loaded) - set(schema)
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(loaded)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def parse_range(text, what: str, count_last: bool = False) -> np.ndarray:
    """'a:b:step' (inclusive) or, with count_last, 'a:b:n' evenly spaced."""
    if isinstance(text, (list, tuple)):
        parts = [float(v) for v in text]
    else:
        try:
            parts = [float(v) for v in str(text).split(":")]
        except ValueError:
            raise ConfigError(f"{what}: expected a:b:step, got {text!r}") from None
    if len(parts) != 3:
        raise ConfigError(f"{what}: expected three fields a:b:step")
    a, b, c = parts
    if count_last:
        n = int(c)
        if n < 1 or (n == 1 and a != b):
            raise ConfigError(f"{what}: empty range")
        return np.linspace(a, b, n)
    if not c > 0 or b < a:
        raise ConfigError(f"{what}: empty range")
    n = int(math.floor((b - a) / c + 1e-9))
    return a + c * np.arange(n + 1)


def potential_spec(cfg: dict) -> PotentialSpec:
    return PotentialSpec(float(cfg["v0"]), float(cfg["domain_halfwidth"]), int(cfg["grid_points"]),
                         int(cfg["stencil_order"]))


def resolve_params(cfg: dict) -> ModelParams:
    if cfg.get("params"):
        return ModelParams.from_dict(cfg["params"])
    if cfg.get("v0") is None or cfg.get("gamma") is None:
        raise ConfigError("need v0 and gamma (or an explicit params block)")
    if float(cfg["gamma"]) < 0 or float(cfg["v0"]) <= 0:
        raise ConfigError("v0 must be positive and gamma non-negative")
    spec = potential_spec(cfg)
    cache = CoefficientCache() if cfg.get("cache", True) else None
    integrals = cache.get_or_compute(spec) if cache is not None else solve_integrals(spec)
    return integrals.at(float(cfg["gamma"]))


def integrator_config(cfg: dict) -> IntegratorConfig:
    d = dict(cfg.get("integrator") or {})
    for key in ("model", "t_end", "sample_interval"):
        if cfg.get(key) is not None:
            d[key] = cfg[key]
    return IntegratorConfig.from_dict(d)


def initial_state(value) -> PendulumState:
    if value is None:
        raise ConfigError("an initial state is required")
    if isinstance(value, dict):
        unknown = set(value) - set(STATE_FIELDS)
        if unknown:
            raise ConfigError(f"unknown state keys: {sorted(unknown)}")
        return PendulumState(**{k: float(v) for k, v in value.items()})
    if isinstance(value, str):
        pairs = {}
        for item in value.split(","):
            k, _, v = item.partition("=")
            pairs[k.strip()] = v
        return initial_state(pairs)
    if len(value) != 6:
        raise ConfigError("initial state must have 6 components")
    return PendulumState(*(float(v) for v in value))


def write_manifest(directory: Path, command: str, cfg: dict, files: list[str], extra: dict | None = None,
                   name: str = "manifest.json") -> None:
    solver = {k: cfg[k] for k in ("domain_halfwidth", "grid_points", "stencil_order") if k in cfg}
    manifest = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "solver": solver,
        "version": __version__,
        "files": files,
    }
    if extra:
        manifest.update(extra)
    (directory / name).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _out_dir(args, command: str) -> Path:
    out = Path(args.out or f"dwell4_{command.replace('-', '_')}")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------------
# commands


def cmd_coefficients(args, cfg) -> int:
    p = resolve_params(cfg)
    ind = classify_regime(p)
    result = {
        **p.to_dict(),
        "chi0": p.chi0 if p.j0 > 0 else None,
        "chi1": p.chi1 if p.j1 > 0 else None,
        "chi01": p.chi01,
        "regime": ind.regime.value,
        "validity": ind.validity,
        "valid": ind.validity != "invalid",
        "reasons": list(ind.reasons),
    }
    text = json.dumps(result, indent=1, sort_keys=True) + "\n"
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        write_manifest(path.parent, "coefficients", cfg, [path.name], name=path.name + ".manifest.json")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    p = resolve_params(cfg)
    ic = initial_state(cfg["initial"])
    icfg = integrator_config(cfg)
    traj = integrate(ic, p, icfg)
    out = _out_dir(args, "simulate")
    traj.to_csv(out / "trajectory.csv")
    write_manifest(out, "simulate", cfg, ["trajectory.csv"], {
        "params": p.to_dict(),
        "integrator": icfg.to_dict(),
        "termination": traj.termination.value,
        "message": traj.message,
        "max_energy_drift": traj.max_energy_drift,
        "n_steps": traj.n_steps,
    })
    return EXIT_OK if traj.termination is not Termination.STEP_FAILURE else EXIT_NUMERICAL


def cmd_fixed_points(args, cfg) -> int:
    p = resolve_params(cfg)
    z2 = float(cfg["z2"])
    out = _out_dir(args, "fixed-points")
    files = ["fixed_points.csv"]
    write_fixed_points_csv(analytic_fixed_points(p), out / "fixed_points.csv")
    pf = pitchfork_points(p, z2)
    extra = {
        "params": p.to_dict(),
        "pitchfork": {"exists": pf.exists, "z0_plus": pf.z0_plus, "z0_minus": pf.z0_minus,
                      "physical": pf.physical, "residual": pf.residual},
    }
    try:
        extra["critical_imbalance"] = critical_imbalance(p, z2)
    except Dwell4Error:
        extra["critical_imbalance"] = None
    if cfg.get("scan_z0") is not None:
        z0s = parse_range(cfg["scan_z0"], "scan_z0")
        points, counts = [], []
        for z0 in z0s:
            eff = effective_fixed_points(p, z2, float(z0), int(cfg["n_intervals"]))
            points.extend(eff)
            counts.append([float(z0), len(eff)])
        write_effective_csv(points, out / "effective_fixed_points.csv")
        files.append("effective_fixed_points.csv")
        extra["root_counts"] = counts
    write_manifest(out, "fixed-points", cfg, files, extra)
    return EXIT_OK


def cmd_regime_map(args, cfg) -> int:
    grid = SweepGrid.from_dict(cfg.get("grid") or {})
    cache = CoefficientCache() if cfg.get("cache", True) else None
    rmap = sweep(grid, cache, jobs=args.jobs, marked=None if cfg.get("marked", True) else {})
    out = _out_dir(args, "regime-map")
    rmap.write_csv(out / "regime_map.csv")
    boundary_curves(rmap).write_json(out / "boundaries.json")
    marked = {k: {"v0": c.v0, "gamma": c.gamma, "regime": c.regime.value,
                  "chi0": c.indicators.chi0 if c.indicators else None,
                  "chi1": c.indicators.chi1 if c.indicators else None,
                  "chi01": c.indicators.chi01 if c.indicators else None}
              for k, c in rmap.marked.items()}
    write_manifest(out, "regime-map", cfg, ["regime_map.csv", "boundaries.json"],
                   {"grid": grid.to_dict(), "marked": marked})
    return EXIT_OK


def cmd_portrait(args, cfg) -> int:
    p = resolve_params(cfg)
    icfg = integrator_config(cfg)
    plane = tuple(cfg["plane"])
    if len(plane) != 2 or any(v not in STATE_FIELDS for v in plane):
        raise ConfigError(f"plane must name two of {STATE_FIELDS}")
    base = {"z0": float(cfg["z0"]), "theta0": float(cfg["theta0"]), "z2": float(cfg["z2"])}
    zs = parse_range(cfg["z_values"], "z_values", count_last=True)
    ics = []
    for th in cfg["theta_values"]:
        for z in zs:
            d = dict(base)
            d[plane[0]] = float(z)
            d[plane[1]] = float(th)
            ics.append(PendulumState(**d))
    if int(cfg["random"]) > 0:
        # uniform draws inside the bounds of the plane's imbalance variable
        rng = np.random.default_rng(int(cfg["seed"]))
        for _ in range(int(cfg["random"])):
            d = dict(base)
            d[plane[0]] = float(rng.uniform(-0.45, 0.45))
            d[plane[1]] = float(rng.uniform(-math.pi, math.pi))
            ics.append(PendulumState(**d))
    portrait = phase_portrait(ics, p, icfg, plane, jobs=args.jobs)
    out = _out_dir(args, "portrait")
    portrait.write(out, {"command": "portrait", "config": cfg, "config_hash": config_hash(cfg),
                         "version": __version__,
                         "solver": {k: cfg[k] for k in ("domain_halfwidth", "grid_points", "stencil_order")}})
    return EXIT_OK


def cmd_poincare(args, cfg) -> int:
    p = resolve_params(cfg)
    ic = initial_state(cfg["initial"])
    icfg = integrator_config(cfg)
    traj = integrate(ic, p, icfg)
    name, value = cfg["section"]
    pts = poincare_section(traj, (str(name), float(value)), int(cfg["direction"]), tuple(cfg["plane"]))
    out = _out_dir(args, "poincare")
    write_section_csv(pts, tuple(cfg["plane"]), out / "section.csv")
    write_manifest(out, "poincare", cfg, ["section.csv"], {
        "params": p.to_dict(), "integrator": icfg.to_dict(),
        "termination": traj.termination.value, "n_points": int(pts.shape[0]),
    })
    return EXIT_OK


COMMANDS = {
    "coefficients": cmd_coefficients,
    "simulate": cmd_simulate,
    "fixed-points": cmd_fixed_points,
    "regime-map": cmd_regime_map,
    "portrait": cmd_portrait,
    "poincare": cmd_poincare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dwell4", description="Four-mode double-well BEC dynamics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, potential=True):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output file (coefficients) or directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps/portraits")
        sp.add_argument("--no-cache", dest="cache", action="store_const", const=False, default=None)
        if potential:
            sp.add_argument("--v0", type=float)
            sp.add_argument("--gamma", type=float)
            sp.add_argument("--grid-points", type=int)
            sp.add_argument("--domain-halfwidth", type=float)
            sp.add_argument("--stencil-order", type=int)

    def dynamics_flags(sp):
        sp.add_argument("--model", choices=["full", "averaged", "two-mode"])
        sp.add_argument("--t-end", type=float)
        sp.add_argument("--sample-interval", type=float)

    common(sub.add_parser("coefficients", help="model coefficients for (V0, gamma)"))

    sp = sub.add_parser("simulate", help="integrate one trajectory")
    common(sp)
    dynamics_flags(sp)
    sp.add_argument("--initial", help="e.g. 'z0=0.1,z2=0.6'")

    sp = sub.add_parser("fixed-points", help="balanced, pitchfork and effective fixed points")
    common(sp)
    sp.add_argument("--z2", type=float)
    sp.add_argument("--scan-z0", help="a:b:step of frozen z0 values")
    sp.add_argument("--n-intervals", type=int)

    common(sub.add_parser("regime-map", help="sweep the (V0, gamma) plane"), potential=False)

    sp = sub.add_parser("portrait", help="phase portrait in a (z, theta) plane")
    common(sp)
    dynamics_flags(sp)
    sp.add_argument("--z2", type=float)
    sp.add_argument("--z0", type=float)
    sp.add_argument("--z-values", help="a:b:n initial imbalances")
    sp.add_argument("--random", type=int, help="extra random initial conditions")
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("poincare", help="Poincare section of one trajectory")
    common(sp)
    dynamics_flags(sp)
    sp.add_argument("--initial")
    sp.add_argument("--direction", type=int, choices=[-1, 0, 1])
    return parser


_NOT_CONFIG = {"command", "config", "out", "jobs"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    try:
        cfg = resolve_config(args.command, args.config, overrides)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except (ValueError, TypeError, KeyError) as exc:
        _fail(EXIT_CONFIG, "ConfigError", f"{type(exc).__name__}: {exc}")
    except Dwell4Error as exc:
        _fail(EXIT_NUMERICAL, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
