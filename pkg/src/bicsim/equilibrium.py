"""Steady-state initialisation: load flow plus back-solved machine states."""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleDispatchError, InitializationError, ValidationError
from .machine import GeneratorState
from .network import electrical_torque

SLACK, PV, PQ = "slack", "pv", "pq"
PF_TOL = 1e-10
PF_MAX_ITER = 50


@dataclass(frozen=True)
class PowerFlowSpec:
    """Per-bus classification and setpoints.

    ``P`` and ``Q`` are net injections (generation minus constant-power load);
    ``V`` is the voltage magnitude setpoint used at slack and PV buses.
    """

    bus_type: tuple
    P: np.ndarray
    Q: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        types = tuple(self.bus_type)
        if any(t not in (SLACK, PV, PQ) for t in types):
            raise ValidationError(f"unknown bus type in {types}")
        if types.count(SLACK) != 1:
            raise ValidationError("power flow needs exactly one slack bus")
        object.__setattr__(self, "bus_type", types)
        for name in ("P", "Q", "V"):
            value = np.array(getattr(self, name), dtype=float)
            if value.shape != (len(types),) or not np.all(np.isfinite(value)):
                raise ValidationError(f"power flow setpoint {name} must be finite with one entry per bus")
            object.__setattr__(self, name, value)


def bus_injections(Y, V):
    return V * np.conj(Y @ V)


def solve_power_flow(Y, spec):
    """Newton-Raphson on the polar mismatch equations from a flat start.

    Returns the complex bus voltages.
    """
    Y = np.asarray(Y, dtype=complex)
    N = Y.shape[0]
    types = np.array(spec.bus_type)
    pvpq = np.flatnonzero(types != SLACK)
    pq = np.flatnonzero(types == PQ)
    Vm = np.where(types == PQ, 1.0, spec.V)
    Va = np.zeros(N)
    S_spec = spec.P + 1j * spec.Q

    def mismatch(V):
        dS = bus_injections(Y, V) - S_spec
        return np.concatenate([dS.real[pvpq], dS.imag[pq]])

    V = Vm * np.exp(1j * Va)
    F = mismatch(V)
    for it in range(PF_MAX_ITER + 1):
        err = float(np.max(np.abs(F))) if F.size else 0.0
        if err < PF_TOL:
            return V
        if it == PF_MAX_ITER:
            break
        I = Y @ V
        Vn = V / np.abs(V)
        dS_dVa = 1j * np.diag(V) @ np.conj(np.diag(I) - Y @ np.diag(V))
        dS_dVm = np.diag(V) @ np.conj(Y @ np.diag(Vn)) + np.diag(np.conj(I)) @ np.diag(Vn)
        J = np.block([
            [dS_dVa.real[np.ix_(pvpq, pvpq)], dS_dVm.real[np.ix_(pvpq, pq)]],
            [dS_dVa.imag[np.ix_(pq, pvpq)], dS_dVm.imag[np.ix_(pq, pq)]],
        ])
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise InitializationError(f"singular power-flow Jacobian at iteration {it}") from None
        Va[pvpq] += dx[:pvpq.size]
        Vm[pq] += dx[pvpq.size:]
        V = Vm * np.exp(1j * Va)
        F = mismatch(V)
    raise InitializationError(
        f"power flow did not converge in {PF_MAX_ITER} iterations (max mismatch {err:.3e})")


def back_solve_generator(terminal_voltage, P, Q, params):
    """Machine state and constant inputs reproducing terminal ``P + jQ`` at rest.

    The q-axis lies along ``V + (r_a + jX'_q) I``, which fixes the rotor angle;
    the remaining unknowns follow from the stator relations and from setting
    the three state derivatives to zero with ``omega = omega_s``.

    Returns ``(GeneratorState, T_m_nominal, E_f_nominal)``.
    """
    V = complex(terminal_voltage)
    if abs(V) == 0:
        raise InfeasibleDispatchError("terminal voltage magnitude must be positive")
    I = np.conj(complex(P, Q) / V)
    E_axis = V + complex(params.r_a, params.X_q_prime) * I
    delta = cmath.phase(E_axis) if abs(E_axis) > 0 else cmath.phase(V)
    if abs(cmath.phase(E_axis / V)) >= np.pi / 2:
        raise InfeasibleDispatchError(
            f"load angle outside (-pi/2, pi/2) for P={P}, Q={Q}, V={abs(V):.4f}")
    rot = cmath.exp(-1j * delta)
    i = I * rot
    v = V * rot
    i_q, i_d = i.real, i.imag
    v_q = v.real
    E_q = v_q - params.X_d_prime * i_d + params.r_a * i_q
    if E_q <= 0:
        raise InfeasibleDispatchError(f"non-positive transient emf {E_q:.4f} for P={P}, Q={Q}")
    psi_d = params.X_d_prime * i_d + E_q
    psi_q = params.X_q_prime * i_q
    T_e = electrical_torque(psi_d, psi_q, i_d, i_q)
    E_f = E_q - (params.X_d - params.X_d_prime) * i_d
    state = GeneratorState(delta=delta, omega=params.omega_s, E_q_prime=E_q)
    return state, T_e, E_f


@dataclass(frozen=True)
class EquilibriumPoint:
    states: tuple
    T_m_nominal: np.ndarray
    E_f_nominal: np.ndarray
    bus_voltages: np.ndarray


def power_flow_spec(n_bus, gen_buses, dispatch):
    """Slack/PV classification at generator buses, zero-injection PQ elsewhere.

    ``dispatch`` entries are mappings with ``type`` (``slack`` or ``pv``), ``V``
    and, for PV units, ``P``.
    """
    types = [PQ] * n_bus
    P = np.zeros(n_bus)
    V = np.ones(n_bus)
    for bus, d in zip(gen_buses, dispatch):
        types[bus] = d["type"]
        V[bus] = d["V"]
        if d["type"] == PV:
            P[bus] = d["P"]
    return PowerFlowSpec(tuple(types), P, np.zeros(n_bus), V)


def initialize(Y_lines_loads, gen_buses, gen_params, dispatch):
    """Load flow followed by a back-solve of every machine."""
    n_bus = Y_lines_loads.shape[0]
    V = solve_power_flow(Y_lines_loads, power_flow_spec(n_bus, gen_buses, dispatch))
    S = bus_injections(Y_lines_loads, V)
    states, T_m, E_f = [], [], []
    for bus, p in zip(gen_buses, gen_params):
        st, tm, ef = back_solve_generator(V[bus], S[bus].real, S[bus].imag, p)
        states.append(st)
        T_m.append(tm)
        E_f.append(ef)
    return EquilibriumPoint(tuple(states), np.array(T_m), np.array(E_f), V)
