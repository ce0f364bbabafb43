"""
Independent reference implementations used to derive frozen test values.

Nothing here imports the package's numerical kernels: unitaries come from
``scipy.linalg.expm``, master equations from ``scipy.integrate.solve_ivp`` on
the matrix form, and chi matrices from a least-squares fit over many inputs.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SM = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
SP = SM.conj().T
PAULI = [np.eye(2, dtype=complex), SX, SY, SZ]


def ham(b):
    return 0.5 * (b[0] * SX + b[1] * SY + b[2] * SZ)


def expm_evolve(field, duration, psi0, n):
    """Midpoint-sampled product of ``expm`` steps, ``n`` slices."""
    h = duration / n
    psi = np.asarray(psi0, dtype=complex)
    for k in range(n):
        psi = expm(-1j * h * ham(field((k + 0.5) * h))) @ psi
    return psi


def lindblad_rhs(field, t1, t2):
    def rhs(t, y):
        rho = y.reshape(2, 2)
        h = ham(field(t))
        d = -1j * (h @ rho - rho @ h)
        d += (SM @ rho @ SP - 0.5 * (SP @ SM @ rho + rho @ SP @ SM)) / t1
        n = SP @ SM
        d += 2 / t2 * (n @ rho @ n - 0.5 * (n @ n @ rho + rho @ n @ n))
        return d.reshape(-1)

    return rhs


def lindblad_evolve(field, duration, rho0, t1, t2):
    sol = solve_ivp(lindblad_rhs(field, t1, t2), (0, duration), np.asarray(rho0, complex).reshape(-1),
                    method="DOP853", rtol=1e-11, atol=1e-13)
    return sol.y[:, -1].reshape(2, 2)


def chi_lstsq(channel, n_inputs=12, seed=0):
    """Fit chi from ``channel`` applied to random pure states (overdetermined)."""
    rng = np.random.default_rng(seed)
    rows, rhs = [], []
    for _ in range(n_inputs):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        rho = np.outer(v, v.conj())
        out = channel(rho)
        rows.append(np.stack([(PAULI[i] @ rho @ PAULI[j].conj().T).reshape(-1)
                              for i in range(4) for j in range(4)], axis=1))
        rhs.append(out.reshape(-1))
    a = np.concatenate(rows)
    b = np.concatenate(rhs)
    return np.linalg.lstsq(a, b, rcond=None)[0].reshape(4, 4)


def bloch(rho):
    return np.real([np.trace(SX @ rho), np.trace(SY @ rho), np.trace(SZ @ rho)])


def echo_field(theta0, delta0, t_ramp, t_rot, signs):
    """Piecewise STA echo field (after the pi/2 pulse), split at the pi pulse."""
    w0 = 2 * np.pi / t_rot

    def loop(sign):
        def f(t):
            if t < t_ramp:
                th = theta0 * t / t_ramp
                return np.array([delta0 * np.tan(th), theta0 / t_ramp, delta0])
            if t < t_ramp + t_rot:
                tau = t - t_ramp
                phi = sign * w0 * tau
                om = delta0 * np.tan(theta0) - sign * w0 * np.sin(theta0) * np.cos(theta0)
                dz = delta0 + sign * w0 * np.sin(theta0) ** 2
                return np.array([om * np.cos(phi), om * np.sin(phi), dz])
            th = theta0 * (1 - (t - t_ramp - t_rot) / t_ramp)
            return np.array([delta0 * np.tan(th), -theta0 / t_ramp, delta0])

        return f

    return loop(signs[0]), loop(signs[1]), 2 * t_ramp + t_rot
