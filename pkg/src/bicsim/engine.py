"""Closed-loop time simulation with timed scenario events.

The global state vector is laid out as ``[delta, omega, E_q', sigma_T, sigma_E]``,
each block of length ``n`` (number of machines).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .controller import (CLAMP_TOL, ControllerState, control_outputs, distributed_derivatives,
                         vector_derivatives)
from .equilibrium import initialize
from .errors import BoundViolation, IntegrationDiverged, NetworkSingularError
from .machine import GeneratorState, generator_derivatives
from .network import LoadAdmittance, _real_form, solve_network
from .scenario import CONTROLLER_ACTIVATE, LOAD_ADD, LOAD_REMOVE

log = logging.getLogger(__name__)


def rk4_step(fun, t, y, dt):
    """One classical fourth-order Runge-Kutta step of ``y' = fun(t, y)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    k1 = fun(t, y)
    k2 = fun(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = fun(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = fun(t + dt, y + dt * k3)
    y_new = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_new)):
        raise IntegrationDiverged("non-finite state", t + dt)
    return y_new


def split_state(x, n):
    return x[:n], x[n:2 * n], x[2 * n:3 * n], x[3 * n:4 * n], x[4 * n:5 * n]


class ClosedLoop:
    """Plant plus controller as one ODE, evaluated with the reference network solve.

    ``distributed=True`` evaluates the controller unit by unit through the
    neighbour message exchange instead of the stacked Laplacian form.
    """

    def __init__(self, system, params, graph, loads=None, active=False, distributed=False):
        self.system = system
        self.params = params
        self.graph = graph
        self.loads = tuple(system.loads if loads is None else loads)
        self.active = active
        self.distributed = distributed
        self.Y = system.admittance(self.loads, with_generator_shunts=True)

    @property
    def n(self):
        return self.system.n_gen

    def network(self, x):
        delta, _, E, _, _ = split_state(x, self.n)
        return solve_network(self.Y, list(zip(delta, E)), self.system.gen_params,
                             self.system.gen_buses)

    def derivative(self, t, x):
        n = self.n
        delta, omega, E, sT, sE = split_state(np.asarray(x, dtype=float), n)
        sol = self.network(x)
        state = ControllerState(sT, sE)
        T_m, E_f = control_outputs(self.params, state)
        dx = np.empty(5 * n)
        for i, (p, el) in enumerate(zip(self.system.gen_params, sol.per_generator)):
            dx[i], dx[n + i], dx[2 * n + i] = generator_derivatives(
                GeneratorState(delta[i], omega[i], E[i]), T_m[i], E_f[i], el.i_d, el.T_e, p)
        if self.active:
            P = np.array([el.P for el in sol.per_generator])
            Q = np.array([el.Q for el in sol.per_generator])
            if self.distributed:
                dT, dE = distributed_derivatives(self.graph, self.params, state, omega, P, Q)
            else:
                dT, dE = vector_derivatives(self.graph.adjacency, self.params, sT, sE, omega, P, Q)
            dx[3 * n:4 * n] = dT
            dx[4 * n:] = dE
        else:
            dx[3 * n:] = 0.0
        return dx


def global_derivative(loop, t, x):
    return loop.derivative(t, x)


def reduce_network(Y_net, gen_buses):
    """Kron-reduce the real form of ``Y_net`` onto the generator buses.

    Returns ``(Y_red, K)`` where ``Y_red`` acts on interleaved generator
    terminal voltages and ``V_other = K @ V_gen`` recovers the remaining buses.
    """
    N = Y_net.shape[0]
    others = [b for b in range(N) if b not in set(gen_buses)]
    ig = np.ravel([[2 * b, 2 * b + 1] for b in gen_buses])
    io = np.ravel([[2 * b, 2 * b + 1] for b in others]).astype(int)
    R = _real_form(Y_net)
    if io.size == 0:
        return R[np.ix_(ig, ig)].copy(), np.zeros((0, ig.size)), others
    try:
        K = -np.linalg.solve(R[np.ix_(io, io)], R[np.ix_(io, ig)])
    except np.linalg.LinAlgError:
        raise NetworkSingularError("load-bus block of the network is singular",
                                   np.linalg.cond(R[np.ix_(io, io)])) from None
    Y_red = R[np.ix_(ig, ig)] + R[np.ix_(ig, io)] @ K
    return Y_red, K, others


def _machine_rows(system):
    p = system.gen_params
    return np.array([[g.H, g.D, g.T_d0_prime, g.X_d, g.X_d_prime, g.X_q_prime, g.r_a,
                      g.omega_b, g.omega_s] for g in p]).T.copy()


def _controller_rows(params):
    return np.vstack([params.T_m_nominal, params.E_f_nominal, params.dT_max, params.dT_min,
                      params.dE_max, params.dE_min, params.n_gains, params.m_gains])


@dataclass
class TrajectoryRecord:
    time: float
    omega: np.ndarray
    delta: np.ndarray
    E_q_prime: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    T_m: np.ndarray
    E_f: np.ndarray
    sigma_T: np.ndarray
    sigma_E: np.ndarray
    v_mag: np.ndarray


RECORD_FIELDS = ("omega", "delta", "E_q_prime", "P", "Q", "T_m", "E_f", "sigma_T", "sigma_E")


@dataclass
class Trajectory:
    """Column store of recorded samples; indexing yields :class:`TrajectoryRecord`."""

    time: np.ndarray
    omega: np.ndarray
    delta: np.ndarray
    E_q_prime: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    T_m: np.ndarray
    E_f: np.ndarray
    sigma_T: np.ndarray
    sigma_E: np.ndarray
    v_mag: np.ndarray
    params: object = None
    event_log: list = field(default_factory=list)

    def __len__(self):
        return self.time.size

    def __getitem__(self, k):
        return TrajectoryRecord(float(self.time[k]), *(getattr(self, f)[k].copy() for f in RECORD_FIELDS),
                                self.v_mag[k].copy())

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def n_gen(self):
        return self.omega.shape[1]

    @property
    def n_bus(self):
        return self.v_mag.shape[1]

    def window(self, t0, t1):
        return (self.time >= t0) & (self.time <= t1)

    @classmethod
    def from_records(cls, records, params=None):
        records = list(records)
        cols = {f: np.array([getattr(r, f) for r in records], dtype=float) for f in RECORD_FIELDS}
        return cls(time=np.array([r.time for r in records], dtype=float),
                   v_mag=np.array([r.v_mag for r in records], dtype=float), params=params, **cols)


class Simulation:
    """Stateful driver used by :func:`run_scenario`; exposes the current state between segments."""

    def __init__(self, scenario):
        self.scenario = scenario
        system = scenario.system
        self.n = system.n_gen
        self.equilibrium = initialize(system.admittance(), system.gen_buses, system.gen_params,
                                      system.dispatch)
        eq = self.equilibrium
        self.params = scenario.controller.with_nominal(eq.T_m_nominal, eq.E_f_nominal)
        self.x = np.concatenate([[s.delta for s in eq.states], [s.omega for s in eq.states],
                                 [s.E_q_prime for s in eq.states], np.zeros(2 * self.n)])
        self.step = 0
        self.active = False
        self.loads = list(system.loads)
        self.added = {}
        self.event_log = []
        self._mp = _machine_rows(system)
        self._cp = _controller_rows(self.params)
        self._gains = np.array([self.params.k_T, self.params.k_P, self.params.k_E, self.params.k,
                                self.params.omega_s])
        self._A = np.ascontiguousarray(scenario.graph.adjacency, dtype=float)
        self._chunks = []
        self._record_initial()

    @property
    def time(self):
        return self.step * self.scenario.dt

    def loop(self, distributed=False):
        return ClosedLoop(self.scenario.system, self.params, self.scenario.graph, self.loads,
                          self.active, distributed)

    def _reduced(self):
        system = self.scenario.system
        Y_net = system.admittance(tuple(self.loads))
        return reduce_network(Y_net, system.gen_buses)

    def fast_derivative(self, x=None):
        """Compiled right-hand side at ``x`` (default: current state) on the reduced network."""
        x = self.x if x is None else np.asarray(x, dtype=float)
        Yr, _, _ = self._reduced()
        ok, dx, _, _ = _kernel.derivative(x, Yr, self._mp, self._cp, self._gains, self._A, self.active)
        if not ok:
            raise NetworkSingularError(f"network singular at t={self.time:.6f} s")
        return dx

    def _record_initial(self):
        Yr, K, others = self._reduced()
        ok, _, vg, alg = _kernel.derivative(self.x, Yr, self._mp, self._cp, self._gains, self._A,
                                            self.active)
        if not ok:
            raise NetworkSingularError("network singular at initial state")
        self._store(self.x[None, :], vg[None, :], alg[None, :, :], np.array([0]), K, others)

    def _store(self, xs, vgs, algs, steps, K, others):
        n = self.n
        system = self.scenario.system
        Vg = vgs[:, 0::2] + 1j * vgs[:, 1::2]
        V = np.empty((xs.shape[0], system.n_bus), dtype=complex)
        V[:, list(system.gen_buses)] = Vg
        if others:
            Vo = vgs @ K.T
            V[:, others] = Vo[:, 0::2] + 1j * Vo[:, 1::2]
        self._chunks.append(dict(
            time=steps * self.scenario.dt,
            delta=xs[:, :n], omega=xs[:, n:2 * n], E_q_prime=xs[:, 2 * n:3 * n],
            sigma_T=xs[:, 3 * n:4 * n], sigma_E=xs[:, 4 * n:],
            P=algs[:, 2, :], Q=algs[:, 3, :],
            T_m=self.params.T_m_nominal + xs[:, 3 * n:4 * n],
            E_f=self.params.E_f_nominal + xs[:, 4 * n:],
            v_mag=np.abs(V)))

    def advance(self, nsteps, record_last=False):
        """Integrate ``nsteps`` fixed steps with the current network and mode."""
        if nsteps <= 0:
            return
        sc = self.scenario
        re = sc.record_every
        s0 = self.step
        count = (s0 + nsteps) // re - s0 // re
        if record_last and (s0 + nsteps) % re:
            count += 1
        Yr, K, others = self._reduced()
        m = 5 * self.n
        rec_x = np.empty((count, m))
        rec_vg = np.empty((count, 2 * self.n))
        rec_alg = np.empty((count, 4, self.n))
        rec_step = np.empty(count, dtype=np.int64)
        status, done, nrec, x = _kernel.integrate(
            self.x, s0, nsteps, sc.dt, re, Yr, self._mp, self._cp, self._gains, self._A,
            self.active, CLAMP_TOL, record_last, rec_x, rec_vg, rec_alg, rec_step)
        if nrec:
            self._store(rec_x[:nrec], rec_vg[:nrec], rec_alg[:nrec], rec_step[:nrec], K, others)
        t_fail = (s0 + done + 1) * sc.dt
        if status == _kernel.NONFINITE:
            raise IntegrationDiverged("non-finite state", t_fail)
        if status == _kernel.BOUND:
            raise BoundViolation("controller state left its interval by more than "
                                 f"{CLAMP_TOL:g}", t_fail)
        if status == _kernel.SINGULAR:
            raise NetworkSingularError(f"network singular at t={t_fail:.6f} s")
        self.x = x
        self.step = s0 + nsteps

    def apply(self, event):
        if event.kind == CONTROLLER_ACTIVATE:
            self.active = True
        elif event.kind == LOAD_ADD:
            V = self.loop().network(self.x).bus_voltages
            load = LoadAdmittance.from_power(event.bus, event.P, event.Q, abs(V[event.bus]))
            self.loads.append(load)
            if event.id is not None:
                self.added[event.id] = load
        elif event.kind == LOAD_REMOVE:
            load = self.added.pop(event.ref)
            del self.loads[next(i for i, ld in enumerate(self.loads) if ld is load)]
        self.event_log.append((self.time, event))
        log.info("t=%.3f s: applied %s", self.time, event.kind)

    def trajectory(self):
        cols = {k: np.concatenate([c[k] for c in self._chunks]) for k in self._chunks[0]}
        return Trajectory(params=self.params, event_log=list(self.event_log), **cols)


def run_scenario(scenario):
    """Integrate a scenario from its load-flow equilibrium and return the recorded trajectory."""
    sim = Simulation(scenario)
    for event in scenario.events:
        target = scenario.step_of(event.time)
        sim.advance(target - sim.step)
        sim.apply(event)
    sim.advance(scenario.n_steps - sim.step, record_last=True)
    return sim.trajectory()
