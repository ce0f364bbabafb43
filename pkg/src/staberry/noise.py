"""
Ornstein-Uhlenbeck field noise and Monte Carlo Berry-phase ensembles.

A single STA loop is driven with noise on the amplitude, phase or detuning
of the rotating field. Each trajectory's Berry phase is read from the final
relative phase of |1> against |0>, minus the dynamic phase of the reference
field and its first-order noise correction.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal, stats

from ._csv import write_csv
from .errors import DomainError
from .propagator import DissipationParams, KET0, blocks_superoperator, propagate_final, unvec, vec
from .schedule import (DEFAULT_DELTA0, DEFAULT_DT, FieldBlock, FieldVector, RotationSpec,
                       build_single_loop_program, n_slices)
from .tomography import bloch_array

NOISE_KINDS = ("amplitude", "phase", "detuning")
_BATCH = 64


@dataclass(frozen=True)
class OUParams:
    """Reduced strength ``c``, bandwidth ``gamma_bw`` (1/ns) and noise ``kind``."""

    c: float
    gamma_bw: float = 0.01
    kind: str = "amplitude"

    def __post_init__(self):
        if self.c < 0:
            raise DomainError("noise strength must be >= 0")
        if not self.gamma_bw > 0:
            raise DomainError("noise bandwidth must be positive")
        if self.kind not in NOISE_KINDS:
            raise DomainError(f"noise kind must be one of {NOISE_KINDS}")


@dataclass(frozen=True)
class NoiseTrace:
    """Samples held constant over consecutive slices of width ``dt``."""

    dt: float
    values: np.ndarray
    kind: str = "amplitude"

    @property
    def duration(self) -> float:
        return self.dt * len(self.values)

    def at(self, t) -> np.ndarray:
        idx = np.clip((np.asarray(t, float) / self.dt).astype(int), 0, len(self.values) - 1)
        return self.values[idx]

    def integral(self) -> float:
        return float(np.sum(self.values) * self.dt)


def _ou_samples(params: OUParams, n: int, dt: float, sigma: float, seeds) -> np.ndarray:
    seeds = np.atleast_1d(seeds)
    out = np.zeros((len(seeds), n))
    if n == 0 or sigma == 0:
        return out
    decay = math.exp(-params.gamma_bw * dt)
    kick = sigma * math.sqrt(-math.expm1(-2 * params.gamma_bw * dt))
    for row, seed in zip(out, seeds):
        row[:] = np.random.default_rng(int(seed)).standard_normal(n)
    # exact discretisation x[k] = decay x[k-1] + kick w[k], x[0] stationary
    out[:, 0] *= sigma
    out[:, 1:] *= kick
    return signal.lfilter([1.0], [1.0, -decay], out, axis=-1)


def generate_ou(params: OUParams, duration: float, dt: float, scale: float = 1.0, seed=None) -> NoiseTrace:
    """
    Stationary O-U realisation with standard deviation ``c * |scale|``.

    ``scale`` is Omega_tot for amplitude noise and 1 for phase noise. The
    number of samples is the number of integration slices covering
    ``duration``, so the trace lines up with :meth:`PulseProgram.blocks`.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    n = n_slices(duration, dt)
    width = duration / n if n else dt
    seed = 0 if seed is None else seed
    values = _ou_samples(params, n, width, params.c * abs(scale), [seed])[0]
    return NoiseTrace(width, values, params.kind)


def noise_scale(params: OUParams, spec: RotationSpec) -> float:
    """Stationary-width multiplier: Omega_tot, 1 rad, or Delta0 for detuning."""
    if params.kind == "amplitude":
        return abs(spec.omega_tot)
    return spec.delta0 if params.kind == "detuning" else 1.0


def _perturb(spec: RotationSpec, t_local, baseline: np.ndarray, values: np.ndarray, kind: str) -> np.ndarray:
    baseline = np.asarray(baseline, float)
    values = np.asarray(values, float)
    out = np.array(np.broadcast_to(baseline, values.shape + (3,)))
    if kind == "amplitude":
        phi = spec.phi(t_local)
        out[..., 0] += values * np.cos(phi)
        out[..., 1] += values * np.sin(phi)
    elif kind == "phase":
        c, s = np.cos(values), np.sin(values)
        bx, by = baseline[..., 0], baseline[..., 1]
        out[..., 0] = c * bx - s * by
        out[..., 1] = s * bx + c * by
    elif kind == "detuning":
        out[..., 2] += values
    else:
        raise DomainError(f"unknown noise kind {kind!r}")
    return out


def perturbed_rotation_field(spec: RotationSpec, sta_total: FieldVector, trace: NoiseTrace, t: float) -> FieldVector:
    """Rotation field at local time ``t`` with the trace's noise applied."""
    if not -1e-12 <= t <= spec.t_rot * (1 + 1e-12):
        raise DomainError(f"t={t} outside the rotation window")
    return FieldVector.from_array(_perturb(spec, t, sta_total.as_array(), trace.at(t), trace.kind))


def ramp_dynamic_phase(theta0: float, delta0: float, t_ramp: float) -> float:
    """``integral |B0| dt`` over one linear-theta ramp."""
    return delta0 * t_ramp / theta0 * math.log(1 / math.cos(theta0) + math.tan(theta0))


def dynamic_phase_reference(spec: RotationSpec, trace: NoiseTrace | None = None) -> float:
    """
    Relative dynamic phase of |s_down> over |s_up> across one rotation.

    Baseline ``|B0| T_rot``; with an amplitude-noise trace the first-order
    shift ``sin(theta0) (Omega_tot - omega0 sin cos) / Omega_tot * integral dOmega``
    is added, ``omega0`` signed by the rotation direction. Phase and
    detuning traces add nothing.
    """
    alpha = spec.b0 * spec.t_rot
    if trace is None or trace.kind != "amplitude":
        return alpha
    return alpha + _delta_alpha_factor(spec) * trace.integral()


def _delta_alpha_factor(spec: RotationSpec) -> float:
    s, c = math.sin(spec.theta0), math.cos(spec.theta0)
    return s * (spec.omega_tot - spec.omega0 * s * c) / spec.omega_tot


@dataclass(frozen=True)
class EnsembleConfig:
    theta0: float
    noise: OUParams
    delta0: float = DEFAULT_DELTA0
    t_ramp: float = 10.0
    t_rot: float = 30.0
    direction: str = "C+"
    n_traj: int = 300
    base_seed: int = 0
    dissipation: DissipationParams | None = None
    dt: float = DEFAULT_DT


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def run_noise_ensemble(config: EnsembleConfig, workers: int = 1) -> np.ndarray:
    """
    Berry phase of every noisy single-loop trajectory.

    Trajectory ``i`` uses seed ``base_seed + i``; results are independent of
    ``workers``.
    """
    if config.n_traj < 1:
        raise DomainError("n_traj must be >= 1")
    program = build_single_loop_program(config.theta0, config.delta0, config.t_ramp, config.t_rot,
                                        config.direction, config.dt)
    blocks = program.blocks()
    rot_pos = next(k for k, b in enumerate(blocks)
                   if isinstance(b, FieldBlock) and program.segments[b.segment].kind == "rotation")
    rot_block = blocks[rot_pos]
    spec = program.segments[rot_block.segment].spec
    t_local = rot_block.times - rot_block.t0
    sigma = config.noise.c * noise_scale(config.noise, spec)

    s_signed = spec.direction * spec.solid_angle
    alpha0 = 2 * ramp_dynamic_phase(config.theta0, config.delta0, config.t_ramp) + dynamic_phase_reference(spec)
    factor = _delta_alpha_factor(spec) if config.noise.kind == "amplitude" else 0.0

    def chunk(lo: int) -> np.ndarray:
        seeds = config.base_seed + np.arange(lo, min(lo + _BATCH, config.n_traj))
        values = _ou_samples(config.noise, len(t_local), rot_block.width, sigma, seeds)
        fields = _perturb(spec, t_local, rot_block.fields, values, config.noise.kind)
        noisy = list(blocks)
        noisy[rot_pos] = FieldBlock(rot_block.segment, rot_block.t0, rot_block.width, rot_block.times, fields)
        if config.dissipation is None:
            psi = propagate_final(noisy, KET0)
            # explicit density matrices: a batch of two kets is also (2, 2)
            final = np.einsum("bi,bj->bij", psi, psi.conj())
        else:
            m = blocks_superoperator(noisy, config.dissipation)
            final = unvec(np.einsum("...ij,j->...i", m, vec(np.diag([1.0, 0.0]).astype(complex))))
        xyz = bloch_array(final)
        total = np.arctan2(xyz[:, 1], xyz[:, 0])
        d_alpha = factor * values.sum(axis=1) * rot_block.width
        return s_signed + _wrap(total - alpha0 - d_alpha - s_signed)

    starts = range(0, config.n_traj, _BATCH)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(lo) for lo in starts]
    return np.concatenate(parts)


@dataclass(frozen=True)
class EnsembleStats:
    mean_gamma: float
    sigma: float
    nu: float
    histogram: np.ndarray
    bin_edges: np.ndarray
    gaussian_fit: tuple[float, float]
    skewness: float
    excess_kurtosis: float
    n: int = field(default=0)

    def summary(self) -> dict:
        return {"n": self.n, "mean_gamma": self.mean_gamma, "sigma": self.sigma, "nu": self.nu,
                "skewness": self.skewness, "excess_kurtosis": self.excess_kurtosis,
                "gaussian_center": self.gaussian_fit[0], "gaussian_width": self.gaussian_fit[1],
                "histogram": self.histogram.tolist(), "bin_edges": self.bin_edges.tolist()}


def ensemble_stats(gammas, bins: int = 20) -> EnsembleStats:
    """
    Moments, coherence ``nu = |<exp(i gamma)>|`` and histogram of the ensemble.

    Sums run over the sorted samples with :func:`math.fsum`, so the result
    does not depend on the order in which trajectories arrive.
    """
    g = np.sort(np.asarray(gammas, dtype=float))
    n = len(g)
    if n < 2:
        raise DomainError("need at least two samples")
    mean = math.fsum(g) / n
    var = math.fsum((g - mean) ** 2) / (n - 1)
    sigma = math.sqrt(var)
    nu = abs(complex(math.fsum(np.cos(g)), math.fsum(np.sin(g)))) / n
    counts, edges = np.histogram(g, bins=bins)
    if sigma > 0:
        skew = float(stats.skew(g))
        kurt = float(stats.kurtosis(g))
    else:
        skew = kurt = 0.0
    return EnsembleStats(mean, sigma, min(nu, 1.0), counts, edges, (mean, sigma), skew, kurt, n)


def analytic_sigma_omega(c_omega: float, theta0: float, gamma_bw: float, t_rot: float) -> float:
    """
    Leading-order spread of the Berry phase under O-U amplitude noise::

        2 sqrt(2) c pi sin^2(theta0) cos(theta0) sqrt(x - 1 + exp(-x)) / x,   x = Gamma T_rot
    """
    x = gamma_bw * t_rot
    if not x > 0:
        raise DomainError("gamma_bw * t_rot must be positive")
    if x < 1e-3:
        ratio = math.sqrt(0.5 - x / 6 + x * x / 24 - x**3 / 120)
    else:
        ratio = math.sqrt(x + math.expm1(-x)) / x
    return 2 * math.sqrt(2) * c_omega * math.pi * math.sin(theta0) ** 2 * math.cos(theta0) * ratio


def analytic_nu(sigma: float) -> float:
    """Coherence of a Gaussian phase of spread ``sigma``: ``exp(-sigma^2 / 2)``."""
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    return math.exp(-sigma * sigma / 2)


def write_ensemble_csv(target, gammas, base_seed: int):
    rows = ((i, base_seed + i, g) for i, g in enumerate(gammas))
    write_csv(target, ["trajectory_index", "seed", "gamma_rad"], rows)


def ensemble_summary(config: EnsembleConfig, gammas, bins: int = 20) -> dict:
    st = ensemble_stats(gammas, bins)
    out = st.summary()
    out["config"] = json.loads(json.dumps(asdict(config), default=float))
    if config.noise.kind == "amplitude":
        sig = analytic_sigma_omega(config.noise.c, config.theta0, config.noise.gamma_bw, config.t_rot)
        out.update(analytic_sigma=sig, analytic_nu=analytic_nu(sig))
    return out
