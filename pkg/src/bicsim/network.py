"""Transmission network: nodal admittance assembly and the algebraic network solve.

Complex quantities in the common frame are written ``Q + jD``; machine frame
quantities are ``q + jd``.  The two are related by a rotation through the rotor
angle, ``(x_Q + j x_D) = (x_q + j x_d) e^{j delta}``.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMachineError, NetworkSingularError, ValidationError

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    resistance: float
    reactance: float
    # total line charging; half is placed at each end
    shunt_susceptance: float = 0.0

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValidationError(f"line {self.from_bus}-{self.to_bus} connects a bus to itself")
        if self.resistance == 0 and self.reactance == 0:
            raise ValidationError(f"line {self.from_bus}-{self.to_bus} has zero series impedance")

    @property
    def series_admittance(self):
        return 1.0 / complex(self.resistance, self.reactance)


@dataclass(frozen=True)
class LoadAdmittance:
    bus: int
    admittance: complex

    def __post_init__(self):
        if self.admittance.real < 0:
            raise ValidationError(f"load at bus {self.bus} has negative conductance")

    @classmethod
    def from_power(cls, bus, P, Q, v_mag):
        """Constant admittance drawing ``P + jQ`` at voltage magnitude ``v_mag``."""
        return cls(bus, complex(P, -Q) / v_mag**2)


def build_admittance(lines, loads=(), generator_shunts=(), n_bus=None):
    """Assemble the bus admittance matrix by nodal summation.

    ``generator_shunts`` is a sequence of ``(bus, admittance)`` pairs; for the
    machine model used here the shunt at a generator bus is ``1/r_a``.
    """
    lines = list(lines)
    if not lines:
        raise ValidationError("network needs at least one line")
    if n_bus is None:
        n_bus = 1 + max(max(ln.from_bus, ln.to_bus) for ln in lines)

    def check(bus, what):
        if not 0 <= bus < n_bus:
            raise ValidationError(f"{what} refers to bus {bus}, outside [0, {n_bus})")

    Y = np.zeros((n_bus, n_bus), dtype=complex)
    for ln in lines:
        check(ln.from_bus, "line")
        check(ln.to_bus, "line")
        y = ln.series_admittance
        half_b = 0.5j * ln.shunt_susceptance
        a, b = ln.from_bus, ln.to_bus
        Y[a, a] += y + half_b
        Y[b, b] += y + half_b
        Y[a, b] -= y
        Y[b, a] -= y
    for load in loads:
        check(load.bus, "load")
        Y[load.bus, load.bus] += load.admittance
    for bus, y in generator_shunts:
        check(bus, "generator shunt")
        Y[bus, bus] += y
    return Y


def generator_shunts(gen_buses, gen_params):
    return [(b, 1.0 / p.r_a) for b, p in zip(gen_buses, gen_params)]


@dataclass(frozen=True)
class ElectricalInterface:
    i_d: float
    i_q: float
    psi_d: float
    psi_q: float
    v_d: float
    v_q: float
    i_D: float
    i_Q: float
    v_D: float
    v_Q: float
    i_g: complex
    T_e: float
    P: float
    Q: float


@dataclass(frozen=True)
class NetworkSolution:
    bus_voltages: np.ndarray
    per_generator: tuple
    injections: np.ndarray
    residual: float


def _stator_matrix(params):
    # unknowns ordered (i_q, i_d)
    return np.array([[params.r_a, -params.X_d_prime],
                     [params.X_q_prime, params.r_a]])


def stator_currents(E_q_prime, v_d, v_q, params):
    """Stator currents ``(i_d, i_q)`` from the flux-linkage and stator-voltage relations.

    Solves ``r_a i_q = X'_d i_d + E'_q - v_q`` and ``r_a i_d = -X'_q i_q - v_d``.
    """
    det = params.r_a**2 + params.X_d_prime * params.X_q_prime
    if det == 0:
        raise DegenerateMachineError("stator equations are singular (r_a^2 + X'_d X'_q = 0)")
    rhs_q = E_q_prime - v_q
    rhs_d = -v_d
    i_q = (params.r_a * rhs_q + params.X_d_prime * rhs_d) / det
    i_d = (params.r_a * rhs_d - params.X_q_prime * rhs_q) / det
    return i_d, i_q


def rotate_to_common(i_q, i_d, delta):
    """Rotate a machine-frame pair into the network frame; returns ``(x_Q, x_D)``."""
    z = complex(i_q, i_d) * cmath.exp(1j * delta)
    return z.real, z.imag


def rotate_to_machine(x_Q, x_D, delta):
    z = complex(x_Q, x_D) * cmath.exp(-1j * delta)
    return z.real, z.imag


def injection_current(i_Q, i_D, v_Q, v_D, r_a):
    return complex(i_Q, i_D) + complex(v_Q, v_D) / r_a


def electrical_torque(psi_d, psi_q, i_d, i_q):
    return psi_d * i_q - psi_q * i_d


def machine_power(v_d, v_q, i_d, i_q):
    """Terminal ``(P, Q)`` with ``P + jQ = V I*`` (generator convention)."""
    P = v_d * i_d + v_q * i_q
    Q = v_d * i_q - v_q * i_d
    return P, Q


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _real_form(Y):
    """Embed a complex matrix as a real one acting on interleaved (re, im) pairs."""
    n = Y.shape[0]
    R = np.empty((2 * n, 2 * n))
    R[0::2, 0::2] = Y.real
    R[0::2, 1::2] = -Y.imag
    R[1::2, 0::2] = Y.imag
    R[1::2, 1::2] = Y.real
    return R


def generator_blocks(delta, params):
    """Real 2x2 blocks ``(G, c)`` with machine output current ``i = c E'_q - G v``.

    Both ``i`` and ``v`` are common-frame (Q, D) pairs; ``c`` multiplies the emf.
    """
    M_inv = np.linalg.inv(_stator_matrix(params))
    R = _rot(delta)
    G = R @ M_inv @ R.T
    c = R @ M_inv[:, 0]
    return G, c


def solve_network(Y, gen_states, gen_params, gen_buses):
    """Solve ``I = Y V`` with each machine treated as a current injection source.

    ``Y`` is the full admittance matrix (lines, loads and the ``1/r_a`` generator
    shunts).  ``gen_states`` holds ``(delta, E_q_prime)`` per machine.  The machine
    current is affine in the terminal voltage, so it is folded into the nodal
    equations and a single real linear system of size ``2N`` is solved.
    """
    Y = np.asarray(Y, dtype=complex)
    N = Y.shape[0]
    if len(set(gen_buses)) != len(gen_buses):
        raise ValidationError("at most one generator per bus")
    A = _real_form(Y)
    rhs = np.zeros(2 * N)
    for (delta, E), p, b in zip(gen_states, gen_params, gen_buses):
        G, c = generator_blocks(delta, p)
        sl = slice(2 * b, 2 * b + 2)
        A[sl, sl] += G - np.eye(2) / p.r_a
        rhs[sl] += c * E
    try:
        x = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        raise NetworkSingularError("augmented network matrix is singular", np.linalg.cond(A)) from None
    if not np.all(np.isfinite(x)):
        raise NetworkSingularError("network solve produced non-finite voltages", np.linalg.cond(A))
    V = x[0::2] + 1j * x[1::2]

    per_gen = []
    I = np.zeros(N, dtype=complex)
    for (delta, E), p, b in zip(gen_states, gen_params, gen_buses):
        v_Q, v_D = V[b].real, V[b].imag
        v_q, v_d = rotate_to_machine(v_Q, v_D, delta)
        i_d, i_q = stator_currents(E, v_d, v_q, p)
        psi_d = p.X_d_prime * i_d + E
        psi_q = p.X_q_prime * i_q
        i_Q, i_D = rotate_to_common(i_q, i_d, delta)
        i_g = injection_current(i_Q, i_D, v_Q, v_D, p.r_a)
        P, Q = machine_power(v_d, v_q, i_d, i_q)
        I[b] = i_g
        per_gen.append(ElectricalInterface(
            i_d=i_d, i_q=i_q, psi_d=psi_d, psi_q=psi_q, v_d=v_d, v_q=v_q,
            i_D=i_D, i_Q=i_Q, v_D=v_D, v_Q=v_Q, i_g=i_g,
            T_e=electrical_torque(psi_d, psi_q, i_d, i_q), P=P, Q=Q))
    residual = float(np.max(np.abs(Y @ V - I)))
    if residual > RESIDUAL_TOL * max(1.0, float(np.max(np.abs(I)))):
        raise NetworkSingularError(f"nodal residual {residual:.3e} too large", np.linalg.cond(A))
    return NetworkSolution(bus_voltages=V, per_generator=tuple(per_gen), injections=I,
                           residual=residual)
