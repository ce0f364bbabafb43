"""
Control-field synthesis for the two-level STA experiment.

All fields are effective magnetic fields in the rotating frame, expressed in
rad/ns, so that the Hamiltonian is ``B . sigma / 2`` (hbar = 1). A field is
made of a *reference* part ``B0`` (linear ramps of the polar angle and
constant-speed rotations of the azimuth) plus, when STA is enabled, the
counter-diabatic correction ``B0 x dB0/dt / |B0|**2``.

Programs are immutable sequences of segments. Ideal pulses have zero
duration and are applied as exact rotations; every other segment is sampled
at the midpoint of each integration slice.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .errors import ConstructionError, DomainError, SingularFieldError

#: Default detuning, Delta0 / 2pi = 7 MHz, in rad/ns.
DEFAULT_DELTA0 = 2 * np.pi * 0.007
DEFAULT_DT = 0.01
#: Upper bound on the designed polar angle; keeps Delta0 tan(theta0) finite.
THETA_MAX = np.pi / 2 - 1e-6

_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
_TIME_TOL = 1e-12


@dataclass(frozen=True)
class FieldVector:
    """Cartesian effective field (bx, by, bz) in rad/ns."""

    bx: float
    by: float
    bz: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.bx, self.by, self.bz)):
            raise DomainError(f"non-finite field component in {self!r}")

    @classmethod
    def from_array(cls, arr) -> "FieldVector":
        bx, by, bz = (float(c) for c in np.asarray(arr, dtype=float).reshape(3))
        return cls(bx, by, bz)

    def as_array(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz])

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.bx**2 + self.by**2 + self.bz**2)

    def __add__(self, other: "FieldVector") -> "FieldVector":
        return FieldVector(self.bx + other.bx, self.by + other.by, self.bz + other.bz)

    def __iter__(self):
        return iter((self.bx, self.by, self.bz))


def _check_angle(theta0: float):
    if not 0.0 < theta0 < THETA_MAX:
        raise ConstructionError(f"theta0 must lie in (0, pi/2), got {theta0!r}")


def _check_positive(name: str, value: float):
    if not (math.isfinite(value) and value > 0):
        raise ConstructionError(f"{name} must be positive, got {value!r}")


def _parse_direction(direction) -> int:
    if direction in (1, "+", "C+", "ccw"):
        return 1
    if direction in (-1, "-", "C-", "cw"):
        return -1
    raise ConstructionError(f"unknown rotation direction {direction!r}")


@dataclass(frozen=True)
class RampSpec:
    """Linear ramp of the polar angle between 0 and ``theta0`` over ``t_ramp``."""

    theta0: float
    delta0: float
    t_ramp: float
    direction: str = "up"

    def __post_init__(self):
        _check_angle(self.theta0)
        _check_positive("delta0", self.delta0)
        _check_positive("t_ramp", self.t_ramp)
        if self.direction not in ("up", "down"):
            raise ConstructionError(f"ramp direction must be 'up' or 'down', got {self.direction!r}")

    @property
    def duration(self) -> float:
        return self.t_ramp

    @property
    def theta_rate(self) -> float:
        """Signed d(theta)/dt."""
        rate = self.theta0 / self.t_ramp
        return rate if self.direction == "up" else -rate

    def theta(self, t):
        t = np.asarray(t, dtype=float)
        frac = t / self.t_ramp
        if self.direction == "down":
            frac = 1.0 - frac
        return self.theta0 * frac


@dataclass(frozen=True)
class RotationSpec:
    """
    Constant-speed rotation of the in-plane field at polar angle ``theta0``.

    ``direction`` is +1 for a counterclockwise loop (C+) and -1 for clockwise
    (C-). The signed angular speed is ``omega0 = direction * 2 pi / t_rot``.
    """

    theta0: float
    delta0: float
    t_rot: float
    direction: int = 1

    def __post_init__(self):
        _check_angle(self.theta0)
        _check_positive("delta0", self.delta0)
        _check_positive("t_rot", self.t_rot)
        object.__setattr__(self, "direction", _parse_direction(self.direction))

    @property
    def duration(self) -> float:
        return self.t_rot

    @property
    def omega0(self) -> float:
        return self.direction * 2 * np.pi / self.t_rot

    @property
    def amplitude(self) -> float:
        """Reference in-plane amplitude, Delta0 tan(theta0)."""
        return self.delta0 * math.tan(self.theta0)

    @property
    def b0(self) -> float:
        """Magnitude of the reference field."""
        return self.delta0 / math.cos(self.theta0)

    @property
    def omega_cd(self) -> float:
        return -self.omega0 * math.sin(self.theta0) * math.cos(self.theta0)

    @property
    def delta_cd(self) -> float:
        return self.omega0 * math.sin(self.theta0) ** 2

    @property
    def omega_tot(self) -> float:
        """Signed in-plane amplitude of the STA field; may be negative."""
        return self.amplitude + self.omega_cd

    @property
    def delta_tot(self) -> float:
        return self.delta0 + self.delta_cd

    @property
    def solid_angle(self) -> float:
        return 2 * np.pi * (1 - math.cos(self.theta0))

    def phi(self, t):
        return self.omega0 * np.asarray(t, dtype=float)


def _check_window(t, duration: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    tol = _TIME_TOL * max(1.0, duration)
    if np.any(t < -tol) or np.any(t > duration + tol):
        raise DomainError(f"time outside [0, {duration}] ns")
    return np.clip(t, 0.0, duration)


def _ramp_reference(spec: RampSpec, t) -> tuple[np.ndarray, np.ndarray]:
    t = _check_window(t, spec.t_ramp)
    theta = spec.theta(t)
    tan = np.tan(theta)
    zeros = np.zeros_like(theta)
    b0 = np.stack([spec.delta0 * tan, zeros, np.full_like(theta, spec.delta0)], axis=-1)
    b0_dot = np.stack([spec.delta0 * (1 + tan**2) * spec.theta_rate, zeros, zeros], axis=-1)
    return b0, b0_dot


def _rotation_reference(spec: RotationSpec, t) -> tuple[np.ndarray, np.ndarray]:
    t = _check_window(t, spec.t_rot)
    phi = spec.phi(t)
    amp, w = spec.amplitude, spec.omega0
    c, s = np.cos(phi), np.sin(phi)
    b0 = np.stack([amp * c, amp * s, np.full_like(phi, spec.delta0)], axis=-1)
    b0_dot = np.stack([-amp * w * s, amp * w * c, np.zeros_like(phi)], axis=-1)
    return b0, b0_dot


def reference_ramp_field(spec: RampSpec, t: float) -> FieldVector:
    """Reference ramp field ``(Delta0 tan theta(t), 0, Delta0)``."""
    b0, _ = _ramp_reference(spec, t)
    return FieldVector.from_array(b0)


def reference_rotation_field(spec: RotationSpec, t: float) -> FieldVector:
    """Reference rotating field ``(Omega0 cos phi, Omega0 sin phi, Delta0)``."""
    b0, _ = _rotation_reference(spec, t)
    return FieldVector.from_array(b0)


def _cross_cd(b0: np.ndarray, b0_dot: np.ndarray) -> np.ndarray:
    norm2 = np.sum(b0 * b0, axis=-1, keepdims=True)
    if np.any(norm2 == 0):
        raise SingularFieldError("counter-diabatic field undefined for a zero reference field")
    return np.cross(b0, b0_dot) / norm2


def counter_diabatic_field(b0: FieldVector, b0_dot: FieldVector) -> FieldVector:
    """
    Counter-diabatic field ``B0 x dB0/dt / |B0|^2``.

    Parameters
    ----------
    b0 : FieldVector
        Reference field.
    b0_dot : FieldVector
        Time derivative of the reference field, rad/ns^2.
    """
    return FieldVector.from_array(_cross_cd(b0.as_array(), b0_dot.as_array()))


@dataclass(frozen=True)
class Segment:
    """
    One timed piece of a program.

    ``kind`` is one of ``ramp``, ``rotation``, ``pulse`` or ``idle``. A pulse
    with ``duration == 0`` is ideal (instantaneous); a pulse with positive
    duration is a square resonant drive of amplitude ``angle / duration``
    about ``axis`` with zero detuning.
    """

    kind: str
    spec: RampSpec | RotationSpec | None = None
    sta: bool = True
    duration: float = 0.0
    axis: str | None = None
    angle: float = 0.0
    t_stop: float | None = None

    def __post_init__(self):
        if self.kind in ("ramp", "rotation"):
            expected = RampSpec if self.kind == "ramp" else RotationSpec
            if not isinstance(self.spec, expected):
                raise ConstructionError(f"{self.kind} segment needs a {expected.__name__}")
            duration = float(self.spec.duration)
            if self.t_stop is not None:
                if self.kind != "rotation" or not 0 <= self.t_stop <= duration:
                    raise ConstructionError("t_stop must lie within a rotation segment")
                duration = float(self.t_stop)
            object.__setattr__(self, "duration", duration)
        elif self.kind == "pulse":
            if self.axis not in _AXES:
                raise ConstructionError(f"pulse axis must be x, y or z, got {self.axis!r}")
            if not (math.isfinite(self.duration) and self.duration >= 0):
                raise ConstructionError("pulse duration must be >= 0")
        elif self.kind == "idle":
            if not (math.isfinite(self.duration) and self.duration >= 0):
                raise ConstructionError("idle duration must be >= 0")
        else:
            raise ConstructionError(f"unknown segment kind {self.kind!r}")

    @classmethod
    def ramp(cls, spec: RampSpec, sta: bool = True) -> "Segment":
        return cls("ramp", spec=spec, sta=sta)

    @classmethod
    def rotation(cls, spec: RotationSpec, sta: bool = True, t_stop: float | None = None) -> "Segment":
        """Rotation segment; ``t_stop`` truncates it without changing the speed."""
        return cls("rotation", spec=spec, sta=sta, t_stop=t_stop)

    @classmethod
    def pulse(cls, axis: str, angle: float, duration: float = 0.0) -> "Segment":
        return cls("pulse", axis=axis, angle=float(angle), duration=float(duration))

    @classmethod
    def idle(cls, duration: float) -> "Segment":
        return cls("idle", duration=float(duration))

    @property
    def is_ideal_pulse(self) -> bool:
        return self.kind == "pulse" and self.duration == 0

    def reference(self, t) -> np.ndarray:
        """Reference field B0 at local times ``t`` (shape ``t.shape + (3,)``)."""
        return self._reference_and_rate(t)[0]

    def counter_diabatic(self, t) -> np.ndarray:
        if self.kind not in ("ramp", "rotation"):
            t = _check_window(t, self.duration)
            return np.zeros(t.shape + (3,))
        return _cross_cd(*self._reference_and_rate(t))

    def field(self, t) -> np.ndarray:
        """Total field at local times ``t``; includes B_cd only when ``sta`` is set."""
        b0, b0_dot = self._reference_and_rate(t)
        if self.sta and self.kind in ("ramp", "rotation"):
            return b0 + _cross_cd(b0, b0_dot)
        return b0

    def _reference_and_rate(self, t):
        if self.kind == "ramp":
            return _ramp_reference(self.spec, t)
        if self.kind == "rotation":
            return _rotation_reference(self.spec, _check_window(t, self.duration))
        if self.is_ideal_pulse:
            raise DomainError("ideal pulses have no sampled field")
        t = _check_window(t, self.duration)
        shape = t.shape + (3,)
        if self.kind == "idle":
            return np.zeros(shape), np.zeros(shape)
        amp = self.angle / self.duration
        return np.broadcast_to(amp * np.array(_AXES[self.axis]), shape).copy(), np.zeros(shape)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "ramp":
            s = self.spec
            out.update(theta0=s.theta0, delta0=s.delta0, t_ramp=s.t_ramp, direction=s.direction, sta=self.sta)
        elif self.kind == "rotation":
            s = self.spec
            out.update(theta0=s.theta0, delta0=s.delta0, t_rot=s.t_rot,
                       direction="+" if s.direction > 0 else "-", sta=self.sta)
            if self.t_stop is not None:
                out["t_stop"] = self.t_stop
        elif self.kind == "pulse":
            out.update(axis=self.axis, angle=self.angle, duration=self.duration)
        else:
            out.update(duration=self.duration)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        kind = d.get("kind")
        try:
            if kind == "ramp":
                spec = RampSpec(float(d["theta0"]), float(d["delta0"]), float(d["t_ramp"]), d.get("direction", "up"))
                return cls.ramp(spec, bool(d.get("sta", True)))
            if kind == "rotation":
                spec = RotationSpec(float(d["theta0"]), float(d["delta0"]), float(d["t_rot"]), d.get("direction", "+"))
                t_stop = d.get("t_stop")
                return cls.rotation(spec, bool(d.get("sta", True)), None if t_stop is None else float(t_stop))
            if kind == "pulse":
                return cls.pulse(d["axis"], float(d["angle"]), float(d.get("duration", 0.0)))
            if kind == "idle":
                return cls.idle(float(d["duration"]))
        except KeyError as exc:
            raise ConstructionError(f"{kind} segment missing field {exc}") from None
        raise ConstructionError(f"unknown segment kind {kind!r}")


@dataclass(frozen=True)
class FieldBlock:
    """Midpoint-sampled slices of one timed segment."""

    segment: int
    t0: float
    width: float
    times: np.ndarray
    fields: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return self.t0 + self.width * np.arange(1, len(self.times) + 1)


@dataclass(frozen=True)
class PulseBlock:
    segment: int
    t: float
    axis: str
    angle: float


def n_slices(duration: float, dt: float) -> int:
    """Number of equal slices of width <= ``dt`` covering ``duration``."""
    if duration <= 0:
        return 0
    return max(1, int(math.ceil(duration / dt - 1e-9)))


@dataclass(frozen=True)
class PulseProgram:
    """Ordered segments plus the integration step ``dt`` (ns)."""

    segments: tuple[Segment, ...] = ()
    dt: float = DEFAULT_DT
    _starts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConstructionError(f"dt must be positive, got {self.dt!r}")
        durations = [s.duration for s in self.segments]
        object.__setattr__(self, "_starts", np.concatenate([[0.0], np.cumsum(durations)]))

    @property
    def duration(self) -> float:
        return float(self._starts[-1])

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def segment_start(self, index: int) -> float:
        return float(self._starts[index])

    def locate(self, t: float) -> tuple[int, float]:
        """Index of the timed segment containing ``t`` and the local time."""
        total = self.duration
        tol = _TIME_TOL * max(1.0, total)
        if not (-tol <= t <= total + tol):
            raise DomainError(f"t={t} outside [0, {total}] ns")
        timed = [i for i, s in enumerate(self.segments) if s.duration > 0]
        if not timed:
            raise DomainError("program has no timed segments")
        for i in timed:
            start, end = self._starts[i], self._starts[i + 1]
            if t < end - tol or i == timed[-1]:
                return i, min(max(t - start, 0.0), end - start)
        raise AssertionError("unreachable")

    def total_field(self, t: float) -> FieldVector:
        i, local = self.locate(t)
        return FieldVector.from_array(self.segments[i].field(local))

    def reference_field(self, t: float) -> FieldVector:
        i, local = self.locate(t)
        return FieldVector.from_array(self.segments[i].reference(local))

    def blocks(self) -> list[FieldBlock | PulseBlock]:
        """Discretise into midpoint-sampled field blocks and instantaneous pulses."""
        out = []
        for i, seg in enumerate(self.segments):
            t0 = self.segment_start(i)
            if seg.is_ideal_pulse:
                out.append(PulseBlock(i, t0, seg.axis, seg.angle))
                continue
            n = n_slices(seg.duration, self.dt)
            if n == 0:
                continue
            width = seg.duration / n
            local = width * (np.arange(n) + 0.5)
            out.append(FieldBlock(i, t0, width, t0 + local, seg.field(local)))
        return out

    def with_finite_pulses(self, duration: float) -> "PulseProgram":
        """Copy in which every ideal pulse becomes a square pulse of ``duration`` ns."""
        _check_positive("pulse duration", duration)
        segs = [replace(s, duration=float(duration)) if s.is_ideal_pulse else s for s in self.segments]
        return PulseProgram(tuple(segs), self.dt)

    def with_dt(self, dt: float) -> "PulseProgram":
        return PulseProgram(self.segments, dt)

    def to_dict(self) -> dict:
        return {"dt": self.dt, "segments": [s.to_dict() for s in self.segments]}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "PulseProgram":
        return cls(tuple(Segment.from_dict(s) for s in d.get("segments", [])), float(d.get("dt", DEFAULT_DT)))

    @classmethod
    def from_json(cls, text: str) -> "PulseProgram":
        return cls.from_dict(json.loads(text))


def total_field(program: PulseProgram, t: float) -> FieldVector:
    """Field driving the qubit at program time ``t``."""
    return program.total_field(t)


def _loop(theta0, delta0, t_ramp, t_rot, direction, sta) -> list[Segment]:
    return [
        Segment.ramp(RampSpec(theta0, delta0, t_ramp, "up"), sta),
        Segment.rotation(RotationSpec(theta0, delta0, t_rot, direction), sta),
        Segment.ramp(RampSpec(theta0, delta0, t_ramp, "down"), sta),
    ]


_ECHO_VARIANTS = {"C+-": (1, -1), "C-+": (-1, 1)}


def build_echo_program(theta0: float, delta0: float = DEFAULT_DELTA0, t_ramp: float = 10.0,
                       t_rot: float = 30.0, variant: str = "C+-", sta: bool = True,
                       dt: float = DEFAULT_DT, prepare: bool = True,
                       pulse_duration: float = 0.0) -> PulseProgram:
    """
    Spin-echo Berry-phase program.

    Order: pi/2 about y (omitted when ``prepare`` is False), ramp-up,
    rotation, ramp-down, pi about x, ramp-up, reversed rotation, ramp-down.
    ``variant`` is ``"C+-"`` or ``"C-+"`` and names the rotation signs of the
    dephasing and rephasing halves.
    """
    try:
        first, second = _ECHO_VARIANTS[variant]
    except KeyError:
        raise ConstructionError(f"echo variant must be one of {sorted(_ECHO_VARIANTS)}") from None
    segs = []
    if prepare:
        segs.append(Segment.pulse("y", np.pi / 2, pulse_duration))
    segs += _loop(theta0, delta0, t_ramp, t_rot, first, sta)
    segs.append(Segment.pulse("x", np.pi, pulse_duration))
    segs += _loop(theta0, delta0, t_ramp, t_rot, second, sta)
    return PulseProgram(tuple(segs), dt)


def build_single_loop_program(theta0: float, delta0: float = DEFAULT_DELTA0, t_ramp: float = 10.0,
                              t_rot: float = 30.0, direction="C+", dt: float = DEFAULT_DT,
                              sta: bool = True, pulse_duration: float = 0.0) -> PulseProgram:
    """pi/2 (y), pi (x), then a single ramp-up / rotation / ramp-down loop."""
    segs = [Segment.pulse("y", np.pi / 2, pulse_duration), Segment.pulse("x", np.pi, pulse_duration)]
    segs += _loop(theta0, delta0, t_ramp, t_rot, _parse_direction(direction), sta)
    return PulseProgram(tuple(segs), dt)


def build_trajectory_program(theta0: float, delta0: float = DEFAULT_DELTA0, t_ramp: float = 10.0,
                             t_stop: float = 30.0, direction="C+", dt: float = DEFAULT_DT,
                             t_rot: float = 30.0, sta: bool = True) -> PulseProgram:
    """
    Ground-state probe: ramp-up followed by the first ``t_stop`` ns of a rotation.

    The rotation speed is set by ``t_rot``; ``t_stop == 0`` leaves the ramp only.
    """
    if not (0.0 <= t_stop <= t_rot * (1 + _TIME_TOL)):
        raise DomainError(f"t_stop must lie in [0, t_rot={t_rot}], got {t_stop}")
    segs = [Segment.ramp(RampSpec(theta0, delta0, t_ramp, "up"), sta)]
    if t_stop > 0:
        # a partial rotation keeps the full-loop speed; only the duration is cut
        spec = RotationSpec(theta0, delta0, t_rot, direction)
        segs.append(Segment.rotation(spec, sta, t_stop=min(t_stop, t_rot)))
    return PulseProgram(tuple(segs), dt)


def iter_segments(program: PulseProgram, kind: str) -> Sequence[tuple[int, Segment]]:
    return [(i, s) for i, s in enumerate(program.segments) if s.kind == kind]
