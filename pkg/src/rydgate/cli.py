"""Command-line entry point: JSON config in, CSV/JSON artifacts out.

Subcommands: ``simulate`` (trajectories + gate report),
``calibrate-convention`` (resolve the MHz-vs-angular-frequency reading of
waveform coefficients), ``mcwf`` (trajectory statistics over decay rates
plus linear fit), ``sweep`` (axis sweeps), ``optimize`` (waveform search).

Exit codes: 0 success, 2 invalid configuration (with field-path
diagnostics), 3 numerical failure, 4 calibration found no working
convention.  Artifacts are byte-deterministic for a fixed seed: JSON is
written with sorted keys and no timestamps, and every run writes a
``manifest.json`` embedding the resolved configuration and tool version
(JSON reports embed the same provenance block inline).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .metrics import assemble_gate, gate_report, local_phase_correction
from .mcwf import TrajectorySpec, estimate_gate_error, stats_csv
from .model import (PP_CONVENTIONS, PhysicsParams, build_symmetric_blockade,
                    build_two_level)
from .optimizer import (FAMILY_PARAMS, TARGETS, OptimizationProblem, optimize,
                        trace_csv)
from .propagator import PropagationError, propagate, trajectory_csv
from .sweep import (PERTURBATIONS, MCWFSettings, SweepSpec, fit_linear,
                    run_sweep, sweep_csv)
from .waveform import waveform_from_dict

TWO_PI = 2.0 * math.pi

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CALIBRATION = 4


class ConfigError(Exception):
    """Configuration problem, tagged with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"config error at {path}: {message}")


def _check_keys(block: dict, path: str, required: tuple, optional: tuple = ()):
    if not isinstance(block, dict):
        raise ConfigError(path, "expected a JSON object")
    for key in block:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}.{key}", "unknown field")
    for key in required:
        if key not in block:
            raise ConfigError(f"{path}.{key}", "required field missing")


def _number(block: dict, path: str, key: str, default=None):
    if key not in block:
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}", "expected a number")
    return float(value)


def _integer(block: dict, path: str, key: str, default=None):
    if key not in block:
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key}", "expected an integer")
    return value


def load_config(path: str) -> dict:
    """Parse and structurally validate a run configuration file."""
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(path, str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from exc
    _check_keys(config, "config", (),
                ("physics", "waveform", "simulation", "mcwf", "sweep",
                 "optimize"))
    if "physics" in config:
        _check_keys(config["physics"], "physics", ("B_MHz", "delta_p_MHz"),
                    ("gamma_per_us", "pp_diagonal_convention"))
    if "simulation" in config:
        _check_keys(config["simulation"], "simulation", (),
                    ("tol", "record_points"))
    return config


def _physics(config: dict) -> PhysicsParams:
    if "physics" not in config:
        raise ConfigError("physics", "required block missing")
    block = config["physics"]
    convention = block.get("pp_diagonal_convention", "literal")
    if convention not in PP_CONVENTIONS:
        raise ConfigError("physics.pp_diagonal_convention",
                          f"must be one of {PP_CONVENTIONS}")
    gamma = _number(block, "physics", "gamma_per_us", 0.0)
    if gamma < 0:
        raise ConfigError("physics.gamma_per_us", "must be nonnegative")
    return PhysicsParams(B=TWO_PI * _number(block, "physics", "B_MHz"),
                         delta_p=TWO_PI * _number(block, "physics", "delta_p_MHz"),
                         gamma=gamma, pp_diagonal_convention=convention)


def _waveform(config: dict):
    if "waveform" not in config:
        raise ConfigError("waveform", "required block missing")
    try:
        return waveform_from_dict(config["waveform"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError("waveform", str(exc)) from exc


def _simulation(config: dict) -> tuple[float, int]:
    block = config.get("simulation", {})
    tol = _number(block, "simulation", "tol", 1e-11)
    record = _integer(block, "simulation", "record_points", 1001)
    if record < 256:
        raise ConfigError("simulation.record_points", "must be at least 256")
    return tol, record


def _resolved(config: dict, args) -> dict:
    resolved = json.loads(json.dumps(config))
    block = resolved.setdefault("simulation", {})
    block.setdefault("tol", 1e-11)
    block.setdefault("record_points", 1001)
    if args.seed is not None:
        if "mcwf" in resolved:
            resolved["mcwf"]["base_seed"] = args.seed
        if "optimize" in resolved:
            resolved["optimize"]["seed"] = args.seed
    return resolved


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(args, command: str, resolved: dict, artifacts: list[str]) -> None:
    manifest = {"tool": "rydgate", "version": __version__, "command": command,
                "config": resolved, "artifacts": sorted(artifacts)}
    _write_json(manifest, os.path.join(args.out, "manifest.json"))


def _provenance(resolved: dict) -> dict:
    return {"tool": "rydgate", "version": __version__, "config": resolved}


def cmd_simulate(args, config: dict) -> int:
    physics = _physics(config)
    w = _waveform(config)
    tol, record = _simulation(config)
    resolved = _resolved(config, args)
    m00 = build_symmetric_blockade(w, physics)
    m01 = build_two_level(w)
    r00 = propagate(m00, tol=tol, record=record)
    r01 = propagate(m01, tol=tol, record=record)
    gate = assemble_gate(r00.final_state[0], r01.final_state[0],
                         r01.final_state[0])
    correction = local_phase_correction(gate)
    report = gate_report(gate, correction)
    report["provenance"] = _provenance(resolved)
    os.makedirs(args.out, exist_ok=True)
    trajectory_csv(r00, m00.basis_labels, os.path.join(args.out, "trajectory_00.csv"))
    trajectory_csv(r01, m01.basis_labels, os.path.join(args.out, "trajectory_01.csv"))
    _write_json(report, os.path.join(args.out, "gate_report.json"))
    _emit(args, "simulate", resolved,
          ["trajectory_00.csv", "trajectory_01.csv", "gate_report.json"])
    print(f"fidelity {report['fidelity']!r} corrected error "
          f"{report['corrected']['gate_error']!r}")
    return 0


def _corrected_fidelity(wdict: dict, physics: PhysicsParams, tol: float) -> float:
    w = waveform_from_dict(wdict)
    a00 = propagate(build_symmetric_blockade(w, physics), tol=tol).final_state[0]
    a01 = propagate(build_two_level(w), tol=tol).final_state[0]
    gate = assemble_gate(a00, a01, a01)
    return local_phase_correction(gate).corrected.F


def cmd_calibrate_convention(args, config: dict) -> int:
    """Decide whether waveform coefficients are MHz or already angular.

    Both readings are simulated; the corrected fidelity (insensitive to
    single-qubit phases, so meaningful for both gate families) picks the
    winner, which is cached in ``convention.lock``.
    """
    physics = _physics(config)
    if "waveform" not in config:
        raise ConfigError("waveform", "required block missing")
    if config["waveform"].get("family") not in ("sinusoidal", "bernstein"):
        raise ConfigError("waveform.family",
                          "calibration needs a parametric family "
                          "(sinusoidal or bernstein)")
    tol, _ = _simulation(config)
    resolved = _resolved(config, args)
    os.makedirs(args.out, exist_ok=True)
    lock_path = os.path.join(args.out, "convention.lock")
    if os.path.exists(lock_path) and not args.force:
        with open(lock_path) as fh:
            lock = json.load(fh)
        print(f"convention.lock reused: angular={lock['angular']}")
        return 0
    fidelities = {}
    for angular in (True, False):
        wdict = dict(config["waveform"])
        wdict["angular"] = angular
        fidelities[angular] = _corrected_fidelity(wdict, physics, tol)
    winner = fidelities[True] >= fidelities[False]
    lock = {"angular": winner,
            "fidelity_angular_2pi": fidelities[True],
            "fidelity_plain_MHz": fidelities[False],
            "provenance": _provenance(resolved)}
    _write_json(lock, lock_path)
    _emit(args, "calibrate-convention", resolved, ["convention.lock"])
    print(f"angular 2pi convention: F={fidelities[True]!r}; "
          f"plain MHz: F={fidelities[False]!r}; chose angular={winner}")
    if max(fidelities.values()) <= 0.99:
        print("neither convention reaches F > 0.99; model mismatch",
              file=sys.stderr)
        return EXIT_CALIBRATION
    return 0


def cmd_mcwf(args, config: dict) -> int:
    physics = _physics(config)
    w = _waveform(config)
    tol, _ = _simulation(config)
    if "mcwf" not in config:
        raise ConfigError("mcwf", "required block missing")
    block = config["mcwf"]
    _check_keys(block, "mcwf", ("gamma_values_per_us", "n_trajectories",
                                "base_seed"))
    gammas = block["gamma_values_per_us"]
    if not isinstance(gammas, list) or not gammas:
        raise ConfigError("mcwf.gamma_values_per_us", "expected a non-empty list")
    n_traj = _integer(block, "mcwf", "n_trajectories")
    seed = args.seed if args.seed is not None else _integer(block, "mcwf",
                                                            "base_seed")
    resolved = _resolved(config, args)
    models = (build_symmetric_blockade(w, physics), build_two_level(w),
              build_two_level(w))
    rows = []
    for gamma in gammas:
        spec = TrajectorySpec(models=models, gamma=float(gamma),
                              n_trajectories=n_traj, base_seed=seed, tol=tol)
        rows.append(estimate_gate_error(spec, workers=args.workers))
    os.makedirs(args.out, exist_ok=True)
    stats_csv(rows, os.path.join(args.out, "mcwf_stats.csv"))
    artifacts = ["mcwf_stats.csv"]
    if len(gammas) >= 2:
        fit = fit_linear([(st.gamma, st.mean_gate_error) for st in rows])
        payload = {"slope_per_gamma": fit.slope, "intercept": fit.intercept,
                   "r_squared": fit.r_squared, "provenance": _provenance(resolved)}
        _write_json(payload, os.path.join(args.out, "fit.json"))
        artifacts.append("fit.json")
        print(f"linear fit: slope {fit.slope!r} R^2 {fit.r_squared!r}")
    _emit(args, "mcwf", resolved, artifacts)
    for st in rows:
        print(f"gamma {st.gamma!r}: error {st.mean_gate_error!r} "
              f"+- {st.standard_error!r}")
    return 0


def cmd_sweep(args, config: dict) -> int:
    physics = _physics(config)
    w = _waveform(config)
    tol, _ = _simulation(config)
    if "sweep" not in config:
        raise ConfigError("sweep", "required block missing")
    block = config["sweep"]
    _check_keys(block, "sweep", ("axis_name", "values"),
                ("perturbation", "direction", "score", "mcwf"))
    values = block["values"]
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values", "expected a non-empty list")
    perturbation = block.get("perturbation", "none")
    if perturbation not in PERTURBATIONS:
        raise ConfigError("sweep.perturbation",
                          f"must be one of {PERTURBATIONS}")
    direction = tuple(block.get("direction", (1.0, -1.0)))
    if len(direction) != 2:
        raise ConfigError("sweep.direction", "expected a pair")
    settings = None
    if "mcwf" in block:
        _check_keys(block["mcwf"], "sweep.mcwf", ("n_trajectories", "base_seed"))
        seed = (args.seed if args.seed is not None
                else _integer(block["mcwf"], "sweep.mcwf", "base_seed"))
        settings = MCWFSettings(
            n_trajectories=_integer(block["mcwf"], "sweep.mcwf", "n_trajectories"),
            base_seed=seed)
    resolved = _resolved(config, args)
    try:
        spec = SweepSpec(waveform=w, physics=physics,
                         axis_name=str(block["axis_name"]),
                         values=tuple(float(v) for v in values),
                         perturbation=perturbation, direction=direction,
                         mcwf=settings, score=block.get("score", "corrected"),
                         tol=tol)
    except (TypeError, ValueError) as exc:
        raise ConfigError("sweep", str(exc)) from exc
    points = run_sweep(spec, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    sweep_csv(spec, points, os.path.join(args.out, "sweep.csv"))
    _emit(args, "sweep", resolved, ["sweep.csv"])
    for pt in points:
        print(f"{spec.axis_name} {pt.axis_value!r}: error {pt.gate_error!r}")
    return 0


def cmd_optimize(args, config: dict) -> int:
    physics = _physics(config)
    if "optimize" not in config:
        raise ConfigError("optimize", "required block missing")
    block = config["optimize"]
    _check_keys(block, "optimize", ("family", "bounds", "budget"),
                ("target", "seed", "stop_below", "tol", "x0"))
    family = block["family"]
    if family not in FAMILY_PARAMS:
        raise ConfigError("optimize.family",
                          f"must be one of {tuple(FAMILY_PARAMS)}")
    names = FAMILY_PARAMS[family]
    bounds_block = block["bounds"]
    _check_keys(bounds_block, "optimize.bounds", names)
    bounds = []
    for name in names:
        pair = bounds_block[name]
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"optimize.bounds.{name}", "expected [lo, hi]")
        bounds.append((float(pair[0]), float(pair[1])))
    target = block.get("target", "controlled_PHASE_with_correction")
    if target not in TARGETS:
        raise ConfigError("optimize.target", f"must be one of {TARGETS}")
    seed = args.seed if args.seed is not None else block.get("seed", 0)
    resolved = _resolved(config, args)
    try:
        problem = OptimizationProblem(
            family=family, bounds=tuple(bounds), physics=physics,
            target=target, budget=_integer(block, "optimize", "budget"),
            seed=seed, stop_below=_number(block, "optimize", "stop_below"),
            tol=_number(block, "optimize", "tol", 1e-9))
    except ValueError as exc:
        raise ConfigError("optimize", str(exc)) from exc
    x0 = block.get("x0")
    report = optimize(problem, x0=x0)
    os.makedirs(args.out, exist_ok=True)
    payload = {"best_params": dict(zip(names, report.best_params)),
               "best_error": report.best_error,
               "n_evaluations": report.n_evaluations,
               "budget_exhausted": report.budget_exhausted,
               "provenance": _provenance(resolved)}
    _write_json(payload, os.path.join(args.out, "optimize_report.json"))
    trace_csv(report, os.path.join(args.out, "trace.csv"))
    _emit(args, "optimize", resolved, ["optimize_report.json", "trace.csv"])
    print(f"best error {report.best_error!r} after {report.n_evaluations} "
          f"evaluations")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate-convention": cmd_calibrate_convention,
    "mcwf": cmd_mcwf,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydgate",
        description="Pulse-level simulator and optimizer for Rydberg-blockade "
                    "controlled-phase gates")
    parser.add_argument("--version", action="version",
                        version=f"rydgate {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON run configuration")
        cmd.add_argument("--out", required=True, help="artifact directory")
        cmd.add_argument("--workers", type=int, default=None,
                         help="parallel workers (default: RPL_WORKERS or 1)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override configured seeds")
        cmd.add_argument("--force", action="store_true",
                         help="recompute cached results")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers is None:
        args.workers = int(os.environ.get("RPL_WORKERS", "1"))
    if args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must fit in 64 bits", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PropagationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
