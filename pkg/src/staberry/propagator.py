"""
Unitary and Lindblad time evolution of a driven qubit.

Both integrators share the slicing of :meth:`PulseProgram.blocks`: each slice
holds the field sampled at its midpoint, so the unitary path is the
second-order exponential midpoint rule with the closed-form SU(2) exponential
per slice. The master equation is advanced with classical RK4 on the
vectorised density matrix (column stacking, ``vec(A X B) = (B^T kron A) vec X``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ._csv import write_csv
from .errors import DomainError, IntegrationError, SingularFieldError
from .schedule import FieldBlock, FieldVector, PulseBlock, PulseProgram

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])
#: raising and lowering operators, sigma_+ = |1><0| and sigma_- = |0><1|
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)

_CHUNK = 50_000


def pure_state(a0: complex, a1: complex) -> np.ndarray:
    psi = np.array([a0, a1], dtype=complex)
    if abs(np.vdot(psi, psi).real - 1) > 1e-10:
        raise DomainError("state is not normalised")
    return psi


def density_matrix(psi) -> np.ndarray:
    """Projector onto ``psi`` (or a copy of a 2x2 density matrix)."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape == (2, 2):
        return psi.copy()
    return np.outer(psi, psi.conj())


def _field_array(b) -> np.ndarray:
    if isinstance(b, FieldVector):
        return b.as_array()
    return np.asarray(b, dtype=float)


@dataclass(frozen=True)
class DissipationParams:
    """Relaxation time ``t1`` and spin-echo dephasing time ``t2_echo``, in ns."""

    t1: float
    t2_echo: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2_echo > 0):
            raise DomainError("t1 and t2_echo must be positive")


@dataclass(frozen=True)
class EigenPair:
    s_up: np.ndarray
    s_down: np.ndarray


def hamiltonian(b) -> np.ndarray:
    """``B . sigma / 2`` for a field or a stack of fields (..., 3)."""
    b = _field_array(b)
    return 0.5 * np.einsum("...a,aij->...ij", b, PAULIS)


def step_unitary(b, dt):
    """
    ``exp(-i B.sigma dt / 2)`` in closed form.

    ``b`` may be a :class:`FieldVector` or an array of shape ``(..., 3)``;
    ``dt`` broadcasts against the leading dimensions.
    """
    b = _field_array(b)
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise DomainError("dt must be non-negative")
    norm = np.linalg.norm(b, axis=-1)
    half = 0.5 * norm * dt
    safe = np.where(norm > 0, norm, 1.0)
    n = b / safe[..., None]
    c = np.cos(half)[..., None, None]
    s = np.sin(half)[..., None, None]
    return c * IDENTITY - 1j * s * np.einsum("...a,aij->...ij", n, PAULIS)


def pulse_unitary(axis: str, angle: float) -> np.ndarray:
    b = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}[axis]
    return step_unitary(np.array(b, dtype=float), angle)


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """``M[N-1] @ ... @ M[0]`` over axis -3, by pairwise reduction."""
    mats = np.asarray(mats)
    while mats.shape[-3] > 1:
        n = mats.shape[-3]
        paired = mats[..., 1 : n - n % 2 : 2, :, :] @ mats[..., 0 : n - n % 2 : 2, :, :]
        if n % 2:
            paired = np.concatenate([paired, mats[..., -1:, :, :]], axis=-3)
        mats = paired
    return mats[..., 0, :, :]


@dataclass(frozen=True)
class Trajectory:
    """Recorded states: ``states[k]`` is the state at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[tuple[float, np.ndarray]]:
        return zip(self.times, self.states)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def is_density(self) -> bool:
        return self.states.ndim == 3

    def sample(self, times) -> "Trajectory":
        """Subsample at the recorded instants nearest to ``times`` (last record wins on ties)."""
        times = np.asarray(times, dtype=float)
        # reverse search so repeated time stamps (pulses) resolve to the post-pulse state
        rev = self.times[::-1]
        idx = len(self.times) - 1 - np.array([int(np.argmin(np.abs(rev - t))) for t in times])
        return Trajectory(self.times[idx], self.states[idx])

    def to_csv(self, target):
        if self.is_density:
            header = ["t_ns"] + [f"{p}_rho{i}{j}" for i in range(2) for j in range(2) for p in ("re", "im")]
            flat = self.states.reshape(len(self), 4)
        else:
            header = ["t_ns", "re_a0", "im_a0", "re_a1", "im_a1"]
            flat = self.states
        rows = ([t] + [v for z in row for v in (z.real, z.imag)] for t, row in zip(self.times, flat))
        write_csv(target, header, rows)


def _block_unitaries(block: FieldBlock) -> np.ndarray:
    return step_unitary(block.fields, block.width)


def evolve_unitary(program: PulseProgram, psi0) -> Trajectory:
    """
    Schrodinger evolution of ``psi0`` through ``program``.

    States are recorded at t=0, at every slice boundary and after every ideal
    pulse (which repeats the pulse's time stamp).
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    times, states = [0.0], [psi.copy()]
    for block in program.blocks():
        if isinstance(block, PulseBlock):
            psi = pulse_unitary(block.axis, block.angle) @ psi
            times.append(block.t)
            states.append(psi.copy())
            continue
        us = _block_unitaries(block)
        out = np.empty((len(us), 2), dtype=complex)
        for k, u in enumerate(us):
            psi = u @ psi
            out[k] = psi
        times.extend(block.edges)
        states.extend(out)
    return Trajectory(np.array(times), np.array(states))


def propagate_final(blocks, psi0) -> np.ndarray:
    """
    Final state(s) after ``blocks`` without recording.

    Field blocks may carry a leading batch axis, ``fields.shape == (B, N, 3)``;
    the result then has shape ``(B, 2)``.
    """
    psi = np.asarray(psi0, dtype=complex)
    for block in blocks:
        if isinstance(block, PulseBlock):
            u = pulse_unitary(block.axis, block.angle)
        else:
            u = ordered_product(_block_unitaries(block))
        psi = np.einsum("...ij,...j->...i", u, psi)
    return psi


def program_unitary(program: PulseProgram) -> np.ndarray:
    """Total propagator of ``program``."""
    u = IDENTITY.copy()
    for block in program.blocks():
        if isinstance(block, PulseBlock):
            u = pulse_unitary(block.axis, block.angle) @ u
        else:
            u = ordered_product(_block_unitaries(block)) @ u
    return u


# --- Lindblad ---------------------------------------------------------------

def vec(rho) -> np.ndarray:
    """Column-stacking vectorisation; works on stacks (..., 2, 2)."""
    rho = np.asarray(rho)
    return np.swapaxes(rho, -1, -2).reshape(rho.shape[:-2] + (4,))


def unvec(v) -> np.ndarray:
    v = np.asarray(v)
    return np.swapaxes(v.reshape(v.shape[:-1] + (2, 2)), -1, -2)


def _sandwich(a, b) -> np.ndarray:
    """Superoperator of ``X -> a X b``."""
    return np.kron(np.asarray(b).T, a)


def _dissipator(op) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    ndn = op.conj().T @ op
    return _sandwich(op, op.conj().T) - 0.5 * _sandwich(ndn, IDENTITY) - 0.5 * _sandwich(IDENTITY, ndn)


# -i [sigma_a / 2, .] as superoperators
_COMMUTATORS = np.stack([-0.5j * (_sandwich(p, IDENTITY) - _sandwich(IDENTITY, p)) for p in PAULIS])


def dissipator_superoperator(dis: DissipationParams | None) -> np.ndarray:
    """Relaxation at 1/T1 on sigma_- plus dephasing at 2/T2echo on sigma_+ sigma_-."""
    if dis is None:
        return np.zeros((4, 4), dtype=complex)
    return _dissipator(SIGMA_MINUS) / dis.t1 + (2.0 / dis.t2_echo) * _dissipator(SIGMA_PLUS @ SIGMA_MINUS)


def liouvillian(b, dis: DissipationParams | None) -> np.ndarray:
    """Generator of the master equation for field(s) ``b`` (..., 3)."""
    b = _field_array(b)
    return np.einsum("...a,aij->...ij", b, _COMMUTATORS) + dissipator_superoperator(dis)


def _rk4_maps(gen: np.ndarray, h: float) -> np.ndarray:
    # one RK4 step of v' = G v with G frozen over the slice
    a = gen * h
    eye = np.eye(4)
    return eye + a @ (eye + a @ (eye + a @ (eye + a / 4) / 3) / 2)


def _block_maps(block: FieldBlock, dis):
    for lo in range(0, len(block.times), _CHUNK):
        yield lo, _rk4_maps(liouvillian(block.fields[lo : lo + _CHUNK], dis), block.width)


def _check_states(v: np.ndarray, t: float):
    rho = unvec(v)
    tr = np.trace(rho, axis1=-2, axis2=-1)
    bloch = np.einsum("aij,...ji->...a", PAULIS, rho).real
    radius = np.linalg.norm(bloch, axis=-1)
    if not np.all(np.isfinite(tr)) or np.any(np.abs(tr - 1) > 1e-6) or np.any(radius > 1 + 1e-6):
        raise IntegrationError(f"Lindblad stepping unstable near t={t:.6g} ns; reduce dt")


def evolve_lindblad(program: PulseProgram, rho0, dis: DissipationParams | None,
                    record: bool = True) -> Trajectory:
    """
    Master-equation evolution of ``rho0`` through ``program``.

    With ``record=False`` only the final state is returned (as a one-entry
    trajectory) and ``rho0`` may be a stack ``(k, 2, 2)`` of inputs.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if not record:
        m = lindblad_superoperator(program, dis)
        final = unvec(np.einsum("ij,...j->...i", m, vec(rho0)))
        _check_states(vec(final), program.duration)
        return Trajectory(np.array([program.duration]), final[None])
    v = vec(rho0)
    times, states = [0.0], [v.copy()]
    for block in program.blocks():
        if isinstance(block, PulseBlock):
            u = pulse_unitary(block.axis, block.angle)
            v = _sandwich(u, u.conj().T) @ v
            times.append(block.t)
            states.append(v.copy())
            continue
        out = np.empty((len(block.times), 4), dtype=complex)
        for lo, maps in _block_maps(block, dis):
            for k, m in enumerate(maps):
                v = m @ v
                out[lo + k] = v
        _check_states(v, block.edges[-1])
        times.extend(block.edges)
        states.extend(out)
    return Trajectory(np.array(times), unvec(np.array(states)))


def lindblad_superoperator(program: PulseProgram, dis: DissipationParams | None) -> np.ndarray:
    """Total 4x4 map of ``program`` acting on ``vec(rho)``."""
    return blocks_superoperator(program.blocks(), dis)


def blocks_superoperator(blocks, dis: DissipationParams | None) -> np.ndarray:
    """
    Product of the slice maps of ``blocks``.

    Field blocks may carry a leading batch axis (see :func:`propagate_final`),
    giving a stack of maps.
    """
    total = np.eye(4, dtype=complex)
    for block in blocks:
        if isinstance(block, PulseBlock):
            u = pulse_unitary(block.axis, block.angle)
            total = _sandwich(u, u.conj().T) @ total
            continue
        n = block.fields.shape[-2]
        for lo in range(0, n, _CHUNK):
            gen = liouvillian(block.fields[..., lo : lo + _CHUNK, :], dis)
            total = ordered_product(_rk4_maps(gen, block.width)) @ total
    return total


# --- adiabatic frame ---------------------------------------------------------

def instantaneous_eigenstates(b0) -> EigenPair:
    """Spin-up/down eigenstates of ``B0 . sigma / 2`` (eigenvalues +-|B0|/2)."""
    bx, by, bz = _field_array(b0)
    rho = math.hypot(bx, by)
    if rho == 0 and bz == 0:
        raise SingularFieldError("eigenstates are degenerate for a zero field")
    theta = math.atan2(rho, bz)
    phi = math.atan2(by, bx)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    up = np.array([c, np.exp(1j * phi) * s])
    down = np.array([-np.exp(-1j * phi) * s, c])
    return EigenPair(up, down)


def tracking_fidelity(states: Trajectory, program: PulseProgram) -> float:
    """
    Worst overlap ``|<s_n(t)|psi(t)>|`` along a trajectory.

    ``n`` is the reference-field eigenstate closest to the initial state.
    """
    if program.duration == 0 or len(states) == 0:
        return 1.0
    psi_first = states.states[0]
    pair0 = instantaneous_eigenstates(program.reference_field(0.0))
    use_up = abs(np.vdot(pair0.s_up, psi_first)) >= abs(np.vdot(pair0.s_down, psi_first))
    worst = 1.0
    for t, psi in states:
        pair = instantaneous_eigenstates(program.reference_field(float(t)))
        ref = pair.s_up if use_up else pair.s_down
        worst = min(worst, abs(np.vdot(ref, psi)))
    return float(worst)
