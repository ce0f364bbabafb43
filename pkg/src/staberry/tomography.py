"""
Bloch-vector readout, Berry-phase extraction and solid-angle analysis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from ._csv import write_csv
from .errors import DomainError, FitError, UndefinedPhaseError
from .propagator import PAULIS, Trajectory, density_matrix

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def length(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)


def bloch_array(states) -> np.ndarray:
    """Bloch vectors of pure states (..., 2) or density matrices (..., 2, 2)."""
    states = np.asarray(states, dtype=complex)
    if states.shape[-2:] != (2, 2):
        states = np.einsum("...i,...j->...ij", states, states.conj())
    return np.einsum("aij,...ji->...a", PAULIS, states).real


def bloch_vector(rho) -> BlochVector:
    """``(Tr sigma_x rho, Tr sigma_y rho, Tr sigma_z rho)``."""
    return BlochVector(*(float(v) for v in bloch_array(density_matrix(rho))))


def sample_qst(rho, shots: int, seed=None) -> BlochVector:
    """
    Finite-statistics tomography: ``shots`` projective measurements per axis.

    Each component is estimated as ``2 k / shots - 1`` with ``k`` drawn from a
    binomial of success probability ``(1 + <sigma_i>) / 2``.
    """
    if shots < 1:
        raise DomainError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    p = np.clip((1 + bloch_array(density_matrix(rho))) / 2, 0.0, 1.0)
    counts = rng.binomial(shots, p)
    return BlochVector(*(2 * counts / shots - 1))


@dataclass(frozen=True)
class BerryPhaseResult:
    gamma: float
    branch_offset: float
    raw_angle: float


def _branch(variant: str, s_design: float) -> tuple[float, int]:
    """Lower end of the designated interval and the orientation of the branch."""
    big = s_design >= np.pi
    if variant == "C+-":
        return (-2 * TWO_PI if big else -TWO_PI), -1
    if variant == "C-+":
        return (TWO_PI if big else 0.0), 1
    if variant == "C+":
        return 0.0, 1
    if variant == "C-":
        return -TWO_PI, -1
    raise DomainError(f"unknown variant {variant!r}")


def extract_berry_phase(x: float, y: float, s_design: float, variant: str = "C+-") -> BerryPhaseResult:
    """
    Berry phase from the final in-plane projections.

    The raw angle ``atan2(y, x)`` in (-pi, pi] is shifted by a multiple of 2 pi
    into the interval designated for ``variant`` and the designed solid angle:

    ========  =====================  ======================
    variant   S < pi                 pi <= S < 2 pi
    ========  =====================  ======================
    C+-       (-2 pi, 0]             (-4 pi, -2 pi]
    C-+       [0, 2 pi)              [2 pi, 4 pi)
    C+        [0, 2 pi)              [0, 2 pi)
    C-        (-2 pi, 0]             (-2 pi, 0]
    ========  =====================  ======================
    """
    if x == 0 and y == 0:
        raise UndefinedPhaseError("in-plane Bloch component vanishes")
    if not 0 <= s_design < TWO_PI:
        raise DomainError("s_design must lie in [0, 2 pi)")
    raw = math.atan2(y, x)
    if raw == -math.pi:
        raw = math.pi
    lo, sign = _branch(variant, s_design)
    if sign > 0:
        gamma = lo + (raw - lo) % TWO_PI
    else:
        hi = lo + TWO_PI
        gamma = hi - (hi - raw) % TWO_PI
    return BerryPhaseResult(gamma, gamma - raw, raw)


def unwrap_sweep(x, y, anchor: float) -> np.ndarray:
    """
    Continuity-based alternative to the branch rule along a sweep.

    The sequence of ``atan2`` angles is unwrapped and then shifted by a
    multiple of 2 pi so that its first value is nearest ``anchor``.
    """
    raw = np.unwrap(np.arctan2(np.asarray(y, float), np.asarray(x, float)))
    shift = TWO_PI * np.round((anchor - raw[0]) / TWO_PI)
    return raw + shift


@dataclass(frozen=True)
class SphericalSample:
    t: float
    r: float
    theta: float
    phi: float


@dataclass(frozen=True)
class SphericalPath:
    """Spherical coordinates of a recorded path; ``phi`` is unwrapped."""

    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[SphericalSample]:
        for row in zip(self.t, self.r, self.theta, self.phi):
            yield SphericalSample(*(float(v) for v in row))

    def window(self, t_start: float, t_stop: float = np.inf) -> "SphericalPath":
        m = (self.t >= t_start - 1e-9) & (self.t <= t_stop + 1e-9)
        return SphericalPath(self.t[m], self.r[m], self.theta[m], self.phi[m])

    def to_csv(self, target):
        write_csv(target, ["t_ns", "r", "theta_rad", "phi_rad"], zip(self.t, self.r, self.theta, self.phi))


def spherical_trajectory(states: Trajectory, times=None) -> SphericalPath:
    """
    Radius, polar and unwrapped azimuthal angle of every recorded state.

    A zero-length Bloch vector gives NaN angles. At the poles the azimuth is
    undefined; the previous value (0 at the start) is carried forward.
    """
    if isinstance(states, Trajectory):
        times, vecs = states.times, bloch_array(states.states)
    else:
        vecs = np.asarray(states, dtype=float)
        times = np.arange(len(vecs), dtype=float) if times is None else np.asarray(times, float)
    if len(vecs) == 0:
        raise DomainError("empty trajectory")
    r = np.linalg.norm(vecs, axis=-1)
    rho = np.hypot(vecs[:, 0], vecs[:, 1])
    theta = np.full(len(r), np.nan)
    ok = r > 1e-15
    theta[ok] = np.arccos(np.clip(vecs[ok, 2] / r[ok], -1.0, 1.0))
    raw = np.arctan2(vecs[:, 1], vecs[:, 0])
    defined = ok & (rho > 1e-12 * np.maximum(r, 1e-300))
    phi = np.empty(len(r))
    last = 0.0
    for k in range(len(r)):
        if defined[k]:
            last = last + (raw[k] - last + np.pi) % TWO_PI - np.pi
        phi[k] = last
    phi[~ok] = np.nan
    return SphericalPath(np.asarray(times, float), r, theta, phi)


def solid_angle(samples: SphericalPath | Sequence[SphericalSample]) -> float:
    """Trapezoidal estimate of ``integral (1 - cos theta) dphi`` along the path."""
    if not isinstance(samples, SphericalPath):
        samples = list(samples)
        samples = SphericalPath(*(np.array([getattr(s, f) for s in samples], float)
                                  for f in ("t", "r", "theta", "phi")))
    if len(samples) < 2:
        raise DomainError("need at least two samples")
    if np.any(np.isnan(samples.theta)) or np.any(np.isnan(samples.phi)):
        raise DomainError("path contains undefined angles")
    g = 1 - np.cos(samples.theta)
    return float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(samples.phi)))


@dataclass(frozen=True)
class SlopeFit:
    k: float
    k_err: float
    intercept: float


def fit_slope(points) -> SlopeFit:
    """Ordinary least squares of ``gamma = -k S + b`` over ``(S, gamma)`` pairs."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2 or np.ptp(pts[:, 0]) == 0:
        raise FitError("need at least two distinct S values")
    res = stats.linregress(pts[:, 0], pts[:, 1])
    err = float(res.stderr) if len(pts) > 2 else float("nan")
    return SlopeFit(-float(res.slope), err, float(res.intercept))


def fit_contrast(points, variant: str = "C+-") -> float:
    """
    Least-squares amplitude ``r`` of ``(x, y) = r (cos g, sin g)``.

    ``g = -2 S`` for C+- and ``+2 S`` for C-+; ``points`` holds ``(S, x, y)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise FitError("need at least three points")
    sign = {"C+-": -2.0, "C-+": 2.0}[variant]
    g = sign * pts[:, 0]
    if not np.any(pts[:, 1:] != 0):
        raise FitError("all projections vanish")
    return float(np.mean(pts[:, 1] * np.cos(g) + pts[:, 2] * np.sin(g)))


def write_sweep_csv(target, rows):
    """Rows of ``(S_design, x, y, gamma)``."""
    write_csv(target, ["S_design_rad", "x", "y", "gamma_rad"], rows)
