"""
Process (chi) matrices and gate fidelity of the STA geometric phase gate.

The chi matrix expands a channel in the Pauli basis
``{u1=I, u2=sigma_x, u3=sigma_y, u4=sigma_z}``::

    rho_out = sum_ij chi[i, j] u_i rho_in u_j^dagger
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .propagator import (IDENTITY, KET0, KET1, SIGMA_X, SIGMA_Y, SIGMA_Z, DissipationParams,
                         density_matrix, evolve_lindblad, evolve_unitary, vec)
from .schedule import DEFAULT_DELTA0, DEFAULT_DT, PulseProgram, Segment, build_echo_program

PAULI_BASIS = (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z)
#: theta0 at which the echo gate is a pi-phase gate (S = pi/2)
PI_GATE_THETA0 = float(np.arccos(0.75))
#: square pi-pulse length used for the gate table; see README
TABLE_PULSE_DURATION = 15.0

_PROBES = (
    density_matrix(KET0),
    density_matrix(KET1),
    density_matrix(np.array([1, 1]) / np.sqrt(2)),
    density_matrix(np.array([1, 1j]) / np.sqrt(2)),
)
# superoperator columns of X -> u_i X u_j^dagger, flattened (i, j) row-major
_BASIS_MAPS = np.array([np.kron(uj.conj(), ui).reshape(-1) for ui in PAULI_BASIS for uj in PAULI_BASIS]).T


def chi_from_superoperator(superop) -> np.ndarray:
    """Solve ``superop = sum chi_ij (conj(u_j) kron u_i)`` for chi."""
    superop = np.asarray(superop, dtype=complex)
    return np.linalg.solve(_BASIS_MAPS, superop.reshape(-1)).reshape(4, 4)


def chi_from_probes(outputs) -> np.ndarray:
    """
    Chi of a linear map from its action on |0>, |1>, |+> and |+i>.

    The four outputs fix the images of the matrix units, so the
    reconstruction is exact for any linear map.
    """
    r0, r1, rp, rpi = (np.asarray(o, dtype=complex) for o in outputs)
    mixed = 0.5 * (r0 + r1)
    a, b = rp - mixed, rpi - mixed
    images = {(0, 0): r0, (1, 1): r1, (0, 1): a + 1j * b, (1, 0): a - 1j * b}
    superop = np.zeros((4, 4), dtype=complex)
    for (i, j), img in images.items():
        unit = np.zeros((2, 2), dtype=complex)
        unit[i, j] = 1
        superop[:, int(np.argmax(vec(unit)))] = vec(img)
    if not np.all(np.isfinite(superop)):
        raise np.linalg.LinAlgError("non-finite process reconstruction")
    return chi_from_superoperator(superop)


def apply_chi(chi, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return sum(chi[i, j] * PAULI_BASIS[i] @ rho @ PAULI_BASIS[j].conj().T for i in range(4) for j in range(4))


def simulate_process(program: PulseProgram, dis: DissipationParams | None = None) -> np.ndarray:
    """Chi matrix of ``program``; unitary evolution when ``dis`` is None."""
    if dis is None:
        outs = []
        for rho in _PROBES:
            w, v = np.linalg.eigh(rho)
            psi = v[:, int(np.argmax(w))]
            out = evolve_unitary(program, psi).final
            outs.append(np.outer(out, out.conj()))
    else:
        outs = evolve_lindblad(program, np.stack(_PROBES), dis, record=False).final
    return chi_from_probes(outs)


def unitary_chi(u) -> np.ndarray:
    """Rank-one chi of the unitary channel ``rho -> U rho U^dagger``."""
    coeffs = np.array([np.trace(p.conj().T @ u) / 2 for p in PAULI_BASIS])
    return np.outer(coeffs, coeffs.conj())


def ideal_gate_chi(s_design: float) -> np.ndarray:
    """
    Chi of the echo gate followed by pi_x: ``diag(1, exp(2iS))`` up to a global phase.
    """
    if not 0 <= s_design < 2 * np.pi:
        raise DomainError("s_design must lie in [0, 2 pi)")
    return unitary_chi(np.diag([1.0, np.exp(2j * s_design)]))


def fidelity(chi_ideal, chi) -> float:
    """``Re Tr(chi_ideal chi)``."""
    return float(np.real(np.trace(np.asarray(chi_ideal) @ np.asarray(chi))))


@dataclass(frozen=True)
class QubitSpec:
    label: str
    t1: float
    t2_echo: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2_echo > 0):
            raise DomainError("coherence times must be positive")

    @property
    def dissipation(self) -> DissipationParams:
        return DissipationParams(self.t1, self.t2_echo)


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str
    t_ramp: float
    t_rot: float
    delta0: float = DEFAULT_DELTA0

    def __post_init__(self):
        if self.kind not in ("STA", "adiabatic"):
            raise DomainError("protocol kind must be 'STA' or 'adiabatic'")
        if not (self.t_ramp > 0 and self.t_rot > 0 and self.delta0 > 0):
            raise DomainError("protocol times and detuning must be positive")


PHASE_QUBIT = QubitSpec("phase qubit", 270.0, 450.0)
XMON = QubitSpec("Xmon", 20_000.0, 20_000.0)
STA_PROTOCOL = ProtocolSpec("STA", 10.0, 30.0)
ADIABATIC_PROTOCOL = ProtocolSpec("adiabatic", 350.0, 1000.0)


def gate_program(protocol: ProtocolSpec, theta0: float = PI_GATE_THETA0, dt: float = DEFAULT_DT,
                 pulse_duration: float = TABLE_PULSE_DURATION) -> PulseProgram:
    """C+- echo (no preparation pulse) followed by the pi_x that closes the phase gate."""
    echo = build_echo_program(theta0, protocol.delta0, protocol.t_ramp, protocol.t_rot, "C+-",
                              sta=protocol.kind == "STA", dt=dt, prepare=False, pulse_duration=pulse_duration)
    return PulseProgram(echo.segments + (Segment.pulse("x", np.pi, pulse_duration),), dt)


@dataclass(frozen=True)
class FidelityRow:
    qubit: str
    protocol: str
    t1: float
    t2_echo: float
    t_ramp: float
    t_rot: float
    delta0: float
    fidelity: float


def table_s1_runner(qubits=(PHASE_QUBIT, XMON), protocols=(ADIABATIC_PROTOCOL, STA_PROTOCOL),
                    dt: float = DEFAULT_DT, pulse_duration: float = TABLE_PULSE_DURATION) -> list[FidelityRow]:
    """
    pi-phase gate fidelity for every (qubit, protocol) pair.

    ``pulse_duration`` is the length of the square refocusing and closing
    pi pulses; 0 makes them ideal.
    """
    ideal = ideal_gate_chi(np.pi / 2)
    rows = []
    for q in qubits:
        for p in protocols:
            chi = simulate_process(gate_program(p, dt=dt, pulse_duration=pulse_duration), q.dissipation)
            rows.append(FidelityRow(q.label, p.kind, q.t1, q.t2_echo, p.t_ramp, p.t_rot, p.delta0,
                                    fidelity(ideal, chi)))
    return rows


def format_table(rows: list[FidelityRow]) -> str:
    """Plain-text table laid out like the published gate-fidelity table."""
    labels = [f"{r.qubit} (T1={r.t1:g} ns, T2e={r.t2_echo:g} ns)" for r in rows]
    w = max([len("qubit")] + [len(s) for s in labels]) + 2
    lines = [f"{'qubit':<{w}}{'protocol':<11}{'Delta0/2pi':>11}{'T_ramp':>9}{'T_rot':>9}{'fidelity':>10}"]
    for label, r in zip(labels, rows):
        lines.append(f"{label:<{w}}{r.protocol:<11}{r.delta0 / (2 * np.pi) * 1e3:>7.3g} MHz"
                     f"{r.t_ramp:>6g} ns{r.t_rot:>6g} ns{r.fidelity:>10.4f}")
    return "\n".join(lines)


def table_json(rows: list[FidelityRow]) -> str:
    return json.dumps([{"qubit": r.qubit, "protocol": r.protocol, "t_ramp": r.t_ramp, "t_rot": r.t_rot,
                        "fidelity": r.fidelity} for r in rows], indent=2)
