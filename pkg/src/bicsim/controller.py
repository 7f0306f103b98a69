"""Distributed bounded integral controller for torque and field voltage.

Each unit ``i`` carries two integral states: ``sigma_T`` (torque offset) and
``sigma_E`` (field-voltage offset).  Their vector fields are multiplied by the
polynomial ``g(sigma) = (1 - sigma/d_max)(1 + sigma/d_min)``, which vanishes at
both ends of the admissible interval ``[-d_min, d_max]``; with the small
leakage ``-k sigma`` the field points strictly inwards at the boundary, so the
states never leave the interval and no saturation block is needed.

A unit whose ``g`` reaches zero drops out of the weighted Laplacians, leaving
the remaining units to share the load among themselves.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .errors import BoundViolation, ProtocolViolation, ValidationError

CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class CommGraph:
    """Undirected, unweighted and connected communication graph."""

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError("adjacency must be a square matrix")
        if not np.all((A == 0) | (A == 1)):
            raise ValidationError("adjacency entries must be 0 or 1")
        if not np.array_equal(A, A.T):
            raise ValidationError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValidationError("adjacency must have a zero diagonal")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)
        if not self._connected():
            raise ValidationError("communication graph is not connected")

    def _connected(self):
        n = self.n
        seen = {0}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in self.neighbors(i):
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        return len(seen) == n

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency))
        return frozenset(zip(i.tolist(), j.tolist()))

    @property
    def laplacian(self):
        A = self.adjacency
        return np.diag(A.sum(axis=1)) - A

    def neighbors(self, i):
        return np.flatnonzero(self.adjacency[i]).tolist()


@dataclass(frozen=True)
class ControllerParams:
    k_T: float
    k_P: float
    k_E: float
    k: float
    n_gains: np.ndarray
    m_gains: np.ndarray
    dT_max: np.ndarray
    dT_min: np.ndarray
    dE_max: np.ndarray
    dE_min: np.ndarray
    T_m_nominal: np.ndarray = None
    E_f_nominal: np.ndarray = None
    omega_s: float = 1.0

    def __post_init__(self):
        for name in ("k_T", "k_P", "k_E", "k"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"controller gain {name} must be positive")
        vectors = ("n_gains", "m_gains", "dT_max", "dT_min", "dE_max", "dE_min")
        size = len(np.atleast_1d(self.n_gains))
        for name in vectors + ("T_m_nominal", "E_f_nominal"):
            value = getattr(self, name)
            if value is None:
                value = np.zeros(size)
            value = np.array(value, dtype=float).reshape(-1)
            if value.shape != (size,):
                raise ValidationError(f"{name} must have length {size}")
            if name in vectors and not np.all(value > 0):
                raise ValidationError(f"all entries of {name} must be positive")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n(self):
        return self.n_gains.size

    def with_nominal(self, T_m_nominal, E_f_nominal):
        return replace(self, T_m_nominal=T_m_nominal, E_f_nominal=E_f_nominal)

    @property
    def T_m_limits(self):
        return self.T_m_nominal - self.dT_min, self.T_m_nominal + self.dT_max

    @property
    def E_f_limits(self):
        return self.E_f_nominal - self.dE_min, self.E_f_nominal + self.dE_max


@dataclass
class ControllerState:
    sigma_T: np.ndarray
    sigma_E: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class LocalData:
    """What unit ``i`` is willing to publish to its neighbours."""

    weighted_P: float
    weighted_Q: float
    g_T: float
    g_E: float


@dataclass(frozen=True)
class NeighborMessage:
    sender: int
    weighted_P: float
    weighted_Q: float
    g_T: float
    g_E: float


def g_value(sigma, d_max, d_min):
    return (1.0 - sigma / d_max) * (1.0 + sigma / d_min)


def g_peak(d_max, d_min):
    """Largest value of ``g_value`` over the admissible interval."""
    s = 0.5 * (d_max - d_min)
    return g_value(s, d_max, d_min)


def weighted_laplacian(A, g):
    """``[g][A g] - [g] A [g]``: edge (i, j) carries weight ``g_i g_j``."""
    A = np.asarray(A, dtype=float)
    g = np.asarray(g, dtype=float)
    if A.shape != (g.size, g.size):
        raise ValidationError(f"adjacency shape {A.shape} does not match g of length {g.size}")
    W = g[:, None] * A * g[None, :]
    return np.diag(W.sum(axis=1)) - W


def _check_senders(i, neighbor_msgs, graph):
    senders = [m.sender for m in neighbor_msgs]
    expected = graph.neighbors(i)
    if sorted(senders) != expected:
        stray = sorted(set(senders) - set(expected))
        if stray:
            raise ProtocolViolation(f"unit {i} received messages from non-neighbours {stray}")
        raise ProtocolViolation(f"unit {i} expected messages from {expected}, got {sorted(senders)}")


def sigma_T_derivative(i, sigma_T_i, omega_i, own_weighted_P, own_g_T, neighbor_msgs,
                       params, graph):
    """Torque-offset rate for unit ``i`` from local data and neighbour messages."""
    _check_senders(i, neighbor_msgs, graph)
    consensus = 0.0
    for msg in neighbor_msgs:
        consensus += (own_weighted_P - msg.weighted_P) * msg.g_T
    return (params.k_T * own_g_T * (params.omega_s - omega_i - params.k_P * consensus)
            - params.k * sigma_T_i)


def sigma_E_derivative(i, sigma_E_i, own_weighted_Q, own_g_E, neighbor_msgs, params, graph):
    _check_senders(i, neighbor_msgs, graph)
    consensus = 0.0
    for msg in neighbor_msgs:
        consensus += (own_weighted_Q - msg.weighted_Q) * msg.g_E
    return -params.k_E * own_g_E * consensus - params.k * sigma_E_i


def control_outputs(params, state):
    """Generator inputs ``(T_m, E_f)`` = nominal values plus the integral offsets."""
    return (params.T_m_nominal + np.asarray(state.sigma_T),
            params.E_f_nominal + np.asarray(state.sigma_E))


def local_data(params, state, P, Q):
    g_T = g_value(np.asarray(state.sigma_T), params.dT_max, params.dT_min)
    g_E = g_value(np.asarray(state.sigma_E), params.dE_max, params.dE_min)
    wP = params.n_gains * np.asarray(P)
    wQ = params.m_gains * np.asarray(Q)
    return [LocalData(float(wP[i]), float(wQ[i]), float(g_T[i]), float(g_E[i]))
            for i in range(params.n)]


def exchange_messages(graph, all_local_data):
    """Deliver each unit's published data to its graph neighbours only."""
    if len(all_local_data) != graph.n:
        raise ValidationError(f"expected local data for {graph.n} units, got {len(all_local_data)}")
    inbox = []
    for i in range(graph.n):
        msgs = []
        for j in graph.neighbors(i):
            d = all_local_data[j]
            msgs.append(NeighborMessage(j, d.weighted_P, d.weighted_Q, d.g_T, d.g_E))
        inbox.append(msgs)
    return inbox


def distributed_derivatives(graph, params, state, omega, P, Q):
    """Per-unit evaluation of both rate laws through the message exchange."""
    data = local_data(params, state, P, Q)
    inbox = exchange_messages(graph, data)
    dT = np.empty(params.n)
    dE = np.empty(params.n)
    for i, msgs in enumerate(inbox):
        dT[i] = sigma_T_derivative(i, state.sigma_T[i], omega[i], data[i].weighted_P,
                                   data[i].g_T, msgs, params, graph)
        dE[i] = sigma_E_derivative(i, state.sigma_E[i], data[i].weighted_Q,
                                   data[i].g_E, msgs, params, graph)
    return dT, dE


def vector_derivatives(A, params, sigma_T, sigma_E, omega, P, Q):
    """Stacked form of the rate laws using the weighted Laplacians.

    Works on a trailing unit axis, so ``sigma_T`` etc. may carry leading batch
    dimensions when ``A`` is shared.
    """
    sigma_T = np.asarray(sigma_T, dtype=float)
    sigma_E = np.asarray(sigma_E, dtype=float)
    g_T = g_value(sigma_T, params.dT_max, params.dT_min)
    g_E = g_value(sigma_E, params.dE_max, params.dE_min)
    x_P = params.n_gains * np.asarray(P)
    x_Q = params.m_gains * np.asarray(Q)
    # (L x)_i = g_i sum_j A_ij g_j (x_i - x_j)
    Ag_T = g_T @ A
    Ag_E = g_E @ A
    LP = g_T * (Ag_T * x_P - (g_T * x_P) @ A)
    LQ = g_E * (Ag_E * x_Q - (g_E * x_Q) @ A)
    dT = params.k_T * (g_T * (params.omega_s - np.asarray(omega)) - params.k_P * LP) - params.k * sigma_T
    dE = -params.k_E * LQ - params.k * sigma_E
    return dT, dE


def clamp_sigma(sigma, lower, upper, tol=CLAMP_TOL, label="sigma", time=None):
    """Clamp round-off overshoot back into ``[lower, upper]``.

    Overshoot up to ``tol`` is absorbed; anything larger is a hard error.
    """
    sigma = np.asarray(sigma, dtype=float)
    over = np.maximum(sigma - upper, lower - sigma)
    if np.any(over > tol):
        i = int(np.argmax(over))
        raise BoundViolation(f"{label}[{i}] = {sigma[i]!r} outside [{lower[i]}, {upper[i]}]", time)
    return np.clip(sigma, lower, upper)
