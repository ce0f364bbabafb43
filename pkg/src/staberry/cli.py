"""
Command line front end.

    staberry <experiment> [--config FILE] [--out DIR] [--workers N] [--seed S]

Every experiment writes plot-ready CSV files plus ``summary.json`` into the
output directory (``--out``, else ``$STABERRY_OUT``, else ``./staberry_out``).
Exit status: 0 on success, 2 for an invalid invocation or configuration,
3 when the numerics fail.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import FitError, IntegrationError, SingularFieldError, UndefinedPhaseError
from .experiments import DEFAULT_T_ROTS, PROBE_STEP, berry_sweep, default_theta_grid, rwa_scan, trajectory_experiment
from .frame import LAB_PULSE_DURATION, compile_iq
from .noise import NOISE_KINDS, EnsembleConfig, OUParams, ensemble_summary, run_noise_ensemble, write_ensemble_csv
from .process import ProtocolSpec, QubitSpec, format_table, table_json, table_s1_runner, TABLE_PULSE_DURATION
from .propagator import DissipationParams
from .schedule import DEFAULT_DELTA0, DEFAULT_DT, PulseProgram, build_echo_program
from ._csv import write_csv

OUT_ENV = "STABERRY_OUT"
EXPERIMENTS = ("berry-sweep", "trajectory", "noise-ensemble", "fidelity-table", "compile-iq", "rwa-check")
NUMERICAL_ERRORS = (IntegrationError, FitError, UndefinedPhaseError, SingularFieldError,
                    FloatingPointError, np.linalg.LinAlgError)

_COMMON = {"dt": DEFAULT_DT, "delta0": DEFAULT_DELTA0, "t_ramp": 10.0}
_ECHO = {"theta0": math.pi / 6, "t_rot": 30.0, "variant": "C+-", "sta": True}
DEFAULTS = {
    "berry-sweep": {"theta0_grid": None, "t_rot_grid": list(DEFAULT_T_ROTS), "variant": "C+-", "sta": True,
                    "dissipation": None},
    "trajectory": {"theta0": math.pi / 6, "t_rot": 30.0, "direction": "C+", "sta": True, "dissipation": None,
                   "probe_step": PROBE_STEP},
    "noise-ensemble": {"theta0": math.pi / 3, "t_rot": 30.0, "direction": "C+",
                       "noise": {"kind": "amplitude", "c": 0.1, "gamma_bw": 0.01},
                       "n_traj": 300, "base_seed": 0, "dissipation": None, "bins": 20},
    "fidelity-table": {"qubits": [{"label": "phase qubit", "t1": 270.0, "t2_echo": 450.0},
                                  {"label": "Xmon", "t1": 20000.0, "t2_echo": 20000.0}],
                       "protocols": [{"kind": "adiabatic", "t_ramp": 350.0, "t_rot": 1000.0},
                                     {"kind": "STA", "t_ramp": 10.0, "t_rot": 30.0}],
                       "pulse_duration": TABLE_PULSE_DURATION},
    "compile-iq": {"program": None, "echo": _ECHO, "carrier_ghz": 1.0, "pulse_duration": LAB_PULSE_DURATION},
    "rwa-check": {"program": None, "echo": _ECHO, "carrier_ghz": [0.5, 1.0, 2.0],
                  "pulse_duration": LAB_PULSE_DURATION},
}


class ConfigError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


def default_config(experiment: str) -> dict:
    cfg = {"experiment": experiment, **_COMMON}
    cfg.update(copy.deepcopy(DEFAULTS[experiment]))
    return cfg


def load_config(experiment: str, path=None) -> dict:
    """Defaults for ``experiment`` overlaid with the JSON object in ``path``."""
    cfg = default_config(experiment)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"config: cannot read {path}: {exc}"]) from None
        if not isinstance(user, dict):
            raise ConfigError(["config: top level must be an object"])
        named = user.get("experiment", experiment)
        if named != experiment:
            raise ConfigError([f"experiment: config is for {named!r}, not {experiment!r}"])
        cfg.update(user)
    return cfg


# --- validation ----------------------------------------------------------------

def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(cfg, key, out, path=None):
    v = cfg.get(key)
    if not (_num(v) and v > 0):
        out.append(f"{path or key}: must be a positive number, got {v!r}")


def _theta(v, path, out):
    if not (_num(v) and 0 < v < math.pi / 2):
        out.append(f"{path}: theta0 must lie in (0, pi/2), got {v!r}")


def _grid(cfg, key, out, check):
    v = cfg.get(key)
    if not isinstance(v, list) or not v:
        out.append(f"{key}: must be a non-empty list")
        return
    for i, item in enumerate(v):
        check(item, f"{key}[{i}]", out)


def _dissipation(cfg, out):
    d = cfg.get("dissipation")
    if d is None:
        return
    if not isinstance(d, dict):
        out.append("dissipation: must be an object with t1 and t2_echo, or null")
        return
    for k in ("t1", "t2_echo"):
        _positive(d, k, out, f"dissipation.{k}")


def _direction(cfg, key, allowed, out):
    if cfg.get(key) not in allowed:
        out.append(f"{key}: must be one of {list(allowed)}, got {cfg.get(key)!r}")


def _program_source(cfg, out):
    prog = cfg.get("program")
    if prog is not None:
        try:
            if isinstance(prog, str):
                with open(prog) as fh:
                    PulseProgram.from_json(fh.read())
            else:
                PulseProgram.from_dict(prog)
        except (OSError, ValueError, TypeError) as exc:
            out.append(f"program: {exc}")
        return
    echo = cfg.get("echo")
    if not isinstance(echo, dict):
        out.append("echo: must be an object when no program is given")
        return
    _theta(echo.get("theta0"), "echo.theta0", out)
    _positive(echo, "t_rot", out, "echo.t_rot")
    if echo.get("variant") not in ("C+-", "C-+"):
        out.append(f"echo.variant: must be 'C+-' or 'C-+', got {echo.get('variant')!r}")


def validate(config: dict) -> list[str]:
    """Every invariant violation in ``config`` as ``"path: message"``; empty when runnable."""
    out: list[str] = []
    exp = config.get("experiment")
    if exp not in EXPERIMENTS:
        return [f"experiment: unknown experiment {exp!r}; choose from {list(EXPERIMENTS)}"]
    for key in ("dt", "delta0", "t_ramp"):
        _positive(config, key, out)
    if exp == "berry-sweep":
        if config.get("theta0_grid") is not None:
            _grid(config, "theta0_grid", out, _theta)
            if isinstance(config["theta0_grid"], list) and len(config["theta0_grid"]) < 2:
                out.append("theta0_grid: need at least two points for the slope fit")
        _grid(config, "t_rot_grid", out, lambda v, p, o: None if _num(v) and v > 0 else o.append(f"{p}: must be positive"))
        _direction(config, "variant", ("C+-", "C-+"), out)
        _dissipation(config, out)
    elif exp == "trajectory":
        _theta(config.get("theta0"), "theta0", out)
        _positive(config, "t_rot", out)
        _positive(config, "probe_step", out)
        _direction(config, "direction", ("C+", "C-"), out)
        _dissipation(config, out)
    elif exp == "noise-ensemble":
        _theta(config.get("theta0"), "theta0", out)
        _positive(config, "t_rot", out)
        _direction(config, "direction", ("C+", "C-"), out)
        noise = config.get("noise")
        if not isinstance(noise, dict):
            out.append("noise: must be an object")
        else:
            if noise.get("kind") not in NOISE_KINDS:
                out.append(f"noise.kind: must be one of {list(NOISE_KINDS)}")
            if not (_num(noise.get("c")) and noise["c"] >= 0):
                out.append("noise.c: must be a number >= 0")
            _positive(noise, "gamma_bw", out, "noise.gamma_bw")
        n = config.get("n_traj")
        if not (isinstance(n, int) and not isinstance(n, bool) and n >= 2):
            out.append(f"n_traj: must be an integer >= 2, got {n!r}")
        s = config.get("base_seed")
        if not (isinstance(s, int) and not isinstance(s, bool) and s >= 0):
            out.append(f"base_seed: must be a non-negative integer, got {s!r}")
        b = config.get("bins")
        if not (isinstance(b, int) and b >= 1):
            out.append("bins: must be a positive integer")
        _dissipation(config, out)
    elif exp == "fidelity-table":
        for i, q in enumerate(config.get("qubits") or []):
            for k in ("t1", "t2_echo"):
                _positive(q, k, out, f"qubits[{i}].{k}")
        if not config.get("qubits"):
            out.append("qubits: must be a non-empty list")
        for i, p in enumerate(config.get("protocols") or []):
            if p.get("kind") not in ("STA", "adiabatic"):
                out.append(f"protocols[{i}].kind: must be 'STA' or 'adiabatic'")
            for k in ("t_ramp", "t_rot"):
                _positive(p, k, out, f"protocols[{i}].{k}")
            if "delta0" in p:
                _positive(p, "delta0", out, f"protocols[{i}].delta0")
        if not config.get("protocols"):
            out.append("protocols: must be a non-empty list")
        pd = config.get("pulse_duration")
        if not (_num(pd) and pd >= 0):
            out.append("pulse_duration: must be >= 0")
    else:
        _program_source(config, out)
        _positive(config, "pulse_duration", out)
        ghz = config.get("carrier_ghz")
        values = ghz if isinstance(ghz, list) else [ghz]
        if exp == "compile-iq" and isinstance(ghz, list):
            out.append("carrier_ghz: compile-iq takes a single carrier")
        if not values:
            out.append("carrier_ghz: must not be empty")
        for i, v in enumerate(values):
            path = f"carrier_ghz[{i}]" if isinstance(ghz, list) else "carrier_ghz"
            if not (_num(v) and v > 0):
                out.append(f"{path}: must be positive")
            elif _num(config.get("delta0")) and 2 * math.pi * v <= config["delta0"]:
                out.append(f"{path}: carrier must exceed the detuning")
    return out


# --- runners -------------------------------------------------------------------

def _dis(cfg):
    d = cfg.get("dissipation")
    return None if d is None else DissipationParams(float(d["t1"]), float(d["t2_echo"]))


def _program(cfg) -> PulseProgram:
    prog = cfg.get("program")
    if isinstance(prog, str):
        with open(prog) as fh:
            return PulseProgram.from_json(fh.read())
    if isinstance(prog, dict):
        return PulseProgram.from_dict(prog)
    e = cfg["echo"]
    return build_echo_program(e["theta0"], cfg["delta0"], cfg["t_ramp"], e["t_rot"], e["variant"],
                              e.get("sta", True), cfg["dt"])


def _run_berry_sweep(cfg, out: Path, workers: int) -> dict:
    grid = cfg["theta0_grid"]
    res = berry_sweep(default_theta_grid() if grid is None else grid, cfg["t_rot_grid"], cfg["variant"],
                      cfg["delta0"], cfg["t_ramp"], cfg["sta"], _dis(cfg), cfg["dt"], workers)
    write_csv(out / "berry_sweep.csv", ["T_rot_ns", "S_design_rad", "x", "y", "gamma_rad"], res.rows())
    fits = {f"{tr:g}": {"k": f.k, "k_err": f.k_err, "intercept": f.intercept} for tr, f in res.fits.items()}
    return {"fits": fits, "contrast": {f"{tr:g}": r for tr, r in res.contrast.items()}}


def _run_trajectory(cfg, out: Path, workers: int) -> dict:
    res = trajectory_experiment(cfg["theta0"], cfg["delta0"], cfg["t_ramp"], cfg["t_rot"], cfg["direction"],
                                _dis(cfg), cfg["dt"], cfg["probe_step"], cfg["sta"])
    res.path.to_csv(out / "trajectory.csv")
    return {"solid_angle": res.solid_angle, "ideal_solid_angle": res.ideal_solid_angle,
            "ratio": res.solid_angle / res.ideal_solid_angle}


def _run_noise_ensemble(cfg, out: Path, workers: int) -> dict:
    n = cfg["noise"]
    ec = EnsembleConfig(cfg["theta0"], OUParams(n["c"], n["gamma_bw"], n["kind"]), cfg["delta0"], cfg["t_ramp"],
                        cfg["t_rot"], cfg["direction"], cfg["n_traj"], cfg["base_seed"], _dis(cfg), cfg["dt"])
    gammas = run_noise_ensemble(ec, workers)
    write_ensemble_csv(out / "ensemble.csv", gammas, ec.base_seed)
    summary = ensemble_summary(ec, gammas, cfg["bins"])
    summary.pop("config", None)
    return summary


def _run_fidelity_table(cfg, out: Path, workers: int) -> dict:
    qubits = [QubitSpec(q.get("label", f"qubit {i}"), q["t1"], q["t2_echo"]) for i, q in enumerate(cfg["qubits"])]
    protocols = [ProtocolSpec(p["kind"], p["t_ramp"], p["t_rot"], p.get("delta0", cfg["delta0"]))
                 for p in cfg["protocols"]]
    rows = table_s1_runner(qubits, protocols, cfg["dt"], cfg["pulse_duration"])
    (out / "fidelity_table.json").write_text(table_json(rows) + "\n")
    (out / "fidelity_table.txt").write_text(format_table(rows) + "\n")
    return {"fidelities": [{"qubit": r.qubit, "protocol": r.protocol, "fidelity": r.fidelity} for r in rows]}


def _run_compile_iq(cfg, out: Path, workers: int) -> dict:
    program = _program(cfg)
    if any(s.is_ideal_pulse for s in program):
        program = program.with_finite_pulses(cfg["pulse_duration"])
    wave = compile_iq(program, cfg["delta0"], 2 * math.pi * cfg["carrier_ghz"])
    wave.to_csv(out / "waveform.csv")
    wave.save(out / "waveform.iqw")
    (out / "program.json").write_text(program.to_json(indent=2) + "\n")
    return {"samples": len(wave), "dt": wave.dt, "omega_d": wave.omega_d, "duration": wave.duration,
            "max_amplitude": float(wave.amplitude.max()) if len(wave) else 0.0}


def _run_rwa_check(cfg, out: Path, workers: int) -> dict:
    program = _program(cfg)
    ghz = cfg["carrier_ghz"] if isinstance(cfg["carrier_ghz"], list) else [cfg["carrier_ghz"]]
    scan = rwa_scan(program, [2 * math.pi * g for g in ghz], cfg["delta0"],
                    pulse_duration=cfg["pulse_duration"], workers=workers)
    write_csv(out / "rwa_check.csv", ["carrier_GHz", "omega_d_rad_per_ns", "deviation"],
              [(g, w, d) for g, (w, d) in zip(ghz, scan)])
    return {"deviation": {f"{g:g}": d for g, (_, d) in zip(ghz, scan)}}


_RUNNERS = {"berry-sweep": _run_berry_sweep, "trajectory": _run_trajectory,
            "noise-ensemble": _run_noise_ensemble, "fidelity-table": _run_fidelity_table,
            "compile-iq": _run_compile_iq, "rwa-check": _run_rwa_check}


def run(config: dict, out_dir, workers: int = 1) -> dict:
    """Validate and run ``config``; returns the run summary written to ``summary.json``."""
    problems = validate(config)
    if problems:
        raise ConfigError(problems)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        results = _RUNNERS[config["experiment"]](config, out, workers)
    summary = {"experiment": config["experiment"], "config": config, "results": results,
               "wall_time_s": time.perf_counter() - t0,
               "versions": {"staberry": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                            "python": platform.python_version()}}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="staberry", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON file overriding the experiment defaults")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./staberry_out)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="parallel workers")
    p.add_argument("--seed", type=int, help="base seed (noise-ensemble)")
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.experiment, args.config)
        if args.seed is not None:
            cfg["base_seed"] = args.seed
        if args.print_config:
            print(json.dumps(cfg, indent=2))
            return 0
        if args.workers < 1:
            raise ConfigError(["--workers: must be >= 1"])
        out = args.out or os.environ.get(OUT_ENV) or "staberry_out"
        summary = run(cfg, out, args.workers)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"invalid config: {v}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(summary["results"], indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
