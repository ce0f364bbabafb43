"""
Runners that reproduce the published measurements from the building blocks.

Each runner returns plain dataclasses; the command line and the acceptance
tests both sit on top of these.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .frame import DEFAULT_OMEGA_D, LAB_PULSE_DURATION, LabFrameSpec, rwa_deviation
from .propagator import KET0, DissipationParams, density_matrix, evolve_lindblad, evolve_unitary, propagate_final
from .schedule import DEFAULT_DELTA0, DEFAULT_DT, PulseProgram, build_echo_program, build_trajectory_program
from .tomography import (SlopeFit, SphericalPath, bloch_array, extract_berry_phase, fit_contrast, fit_slope,
                         solid_angle, spherical_trajectory)

#: interval the theta0 grid is drawn from (end points excluded)
THETA_GRID_BOUNDS = (0.1, np.pi / 2 - 0.1)
DEFAULT_T_ROTS = (20.0, 30.0, 40.0, 60.0)
PROBE_STEP = 0.5


def default_theta_grid(n: int = 10) -> np.ndarray:
    """``n`` evenly spaced points strictly inside :data:`THETA_GRID_BOUNDS`."""
    return np.linspace(*THETA_GRID_BOUNDS, n + 2)[1:-1]


def design_solid_angle(theta0) -> np.ndarray:
    return 2 * np.pi * (1 - np.cos(theta0))


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


@dataclass(frozen=True)
class SweepPoint:
    t_rot: float
    theta0: float
    s_design: float
    x: float
    y: float
    gamma: float


@dataclass(frozen=True)
class SweepResult:
    variant: str
    points: list[SweepPoint]
    fits: dict[float, SlopeFit]
    contrast: dict[float, float]

    def rows(self):
        return [(p.t_rot, p.s_design, p.x, p.y, p.gamma) for p in self.points]

    def amplitude_spread(self, t_rot: float) -> float:
        """``(max - min) / mean`` of the in-plane length over one T_rot row."""
        r = np.array([np.hypot(p.x, p.y) for p in self.points if p.t_rot == t_rot])
        return float(np.ptp(r) / np.mean(r))


def echo_final_xy(theta0: float, t_rot: float, variant: str = "C+-", delta0: float = DEFAULT_DELTA0,
                  t_ramp: float = 10.0, sta: bool = True, dis: DissipationParams | None = None,
                  dt: float = DEFAULT_DT) -> tuple[float, float]:
    """In-plane Bloch components at the end of one echo run from |0>."""
    program = build_echo_program(theta0, delta0, t_ramp, t_rot, variant, sta, dt)
    if dis is None:
        final = propagate_final(program.blocks(), KET0)
    else:
        final = evolve_lindblad(program, density_matrix(KET0), dis, record=False).final
    x, y, _ = bloch_array(final)
    return float(x), float(y)


def berry_sweep(theta0s=None, t_rots=DEFAULT_T_ROTS, variant: str = "C+-", delta0: float = DEFAULT_DELTA0,
                t_ramp: float = 10.0, sta: bool = True, dis: DissipationParams | None = None,
                dt: float = DEFAULT_DT, workers: int = 1) -> SweepResult:
    """
    Echo Berry phase over a ``(T_rot, theta0)`` grid, with a slope fit per T_rot.

    Phases are branch-assigned with the designed solid angle.
    """
    theta0s = default_theta_grid() if theta0s is None else np.asarray(theta0s, dtype=float)
    grid = [(float(tr), float(th)) for tr in t_rots for th in theta0s]

    def one(item):
        tr, th = item
        x, y = echo_final_xy(th, tr, variant, delta0, t_ramp, sta, dis, dt)
        s = float(design_solid_angle(th))
        return SweepPoint(tr, th, s, x, y, extract_berry_phase(x, y, s, variant).gamma)

    points = _map(one, grid, workers)
    fits, contrast = {}, {}
    for tr in dict.fromkeys(p.t_rot for p in points):
        row = [p for p in points if p.t_rot == tr]
        fits[tr] = fit_slope([(p.s_design, p.gamma) for p in row])
        if len(row) >= 3:
            contrast[tr] = fit_contrast([(p.s_design, p.x, p.y) for p in row], variant)
    return SweepResult(variant, points, fits, contrast)


@dataclass(frozen=True)
class TrajectoryResult:
    path: SphericalPath
    rotation: SphericalPath
    solid_angle: float
    ideal_solid_angle: float


def trajectory_experiment(theta0: float, delta0: float = DEFAULT_DELTA0, t_ramp: float = 10.0,
                          t_rot: float = 30.0, direction="C+", dis: DissipationParams | None = None,
                          dt: float = DEFAULT_DT, probe: float = PROBE_STEP, sta: bool = True) -> TrajectoryResult:
    """
    Ground-state trajectory probed every ``probe`` ns, and its solid angle.

    Interrupting the rotation at ``t_stop`` and reading the state is the same
    as recording one uninterrupted run at ``t_ramp + t_stop``, so a single
    evolution is sampled on the probe grid.
    """
    program = build_trajectory_program(theta0, delta0, t_ramp, t_rot, direction, dt, t_rot, sta)
    if dis is None:
        traj = evolve_unitary(program, KET0)
    else:
        traj = evolve_lindblad(program, density_matrix(KET0), dis)
    n = int(round(program.duration / probe))
    grid = probe * np.arange(n + 1)
    sampled = traj.sample(grid)
    path = spherical_trajectory(sampled)
    path = SphericalPath(grid, path.r, path.theta, path.phi)
    rotation = path.window(t_ramp)
    return TrajectoryResult(path, rotation, solid_angle(rotation), float(design_solid_angle(theta0)))


def rwa_scan(program: PulseProgram, omega_ds, delta0: float = DEFAULT_DELTA0, psi0=KET0,
             pulse_duration: float = LAB_PULSE_DURATION, workers: int = 1) -> list[tuple[float, float]]:
    """``(omega_d, rwa_deviation)`` for each carrier."""

    def one(w):
        return float(w), rwa_deviation(program, LabFrameSpec.for_carrier(w, delta0), psi0, pulse_duration)

    return _map(one, list(omega_ds), workers)


__all__ = ["DEFAULT_OMEGA_D", "DEFAULT_T_ROTS", "PROBE_STEP", "SweepPoint", "SweepResult", "TrajectoryResult",
           "berry_sweep", "default_theta_grid", "design_solid_angle", "echo_final_xy", "rwa_scan",
           "trajectory_experiment"]
