"""Third-order synchronous machine model.

States per machine are the rotor angle ``delta`` (rad), the speed ``omega``
(pu) and the q-axis transient emf ``E_q_prime`` (pu).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ValidationError

OMEGA_B_60HZ = 2.0 * math.pi * 60.0


@dataclass(frozen=True)
class GeneratorParams:
    H: float
    D: float
    T_d0_prime: float
    X_d: float
    X_d_prime: float
    X_q_prime: float
    r_a: float
    omega_b: float = OMEGA_B_60HZ
    omega_s: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValidationError(f"generator parameter {f.name} must be finite")
        if self.H <= 0:
            raise ValidationError("generator parameter H must be > 0")
        if self.T_d0_prime <= 0:
            raise ValidationError("generator parameter T_d0_prime must be > 0")
        if not self.X_d >= self.X_d_prime > 0:
            raise ValidationError("generator reactances must satisfy X_d >= X_d_prime > 0")
        if self.r_a <= 0:
            raise ValidationError("generator parameter r_a must be > 0")


@dataclass(frozen=True)
class GeneratorState:
    delta: float
    omega: float
    E_q_prime: float


def generator_derivatives(state, T_m, E_f, i_d, T_e, params):
    """Right-hand side of the swing and field equations.

    Returns ``(d_delta, d_omega, d_E_q_prime)``.
    """
    slip = state.omega - params.omega_s
    d_delta = params.omega_b * slip
    d_omega = (T_m - T_e - params.D * slip) / (2.0 * params.H)
    d_E = (E_f - state.E_q_prime + (params.X_d - params.X_d_prime) * i_d) / params.T_d0_prime
    return d_delta, d_omega, d_E


def stack_params(params):
    """Column arrays of machine constants, keyed by field name."""
    return {f.name: np.array([getattr(p, f.name) for p in params], dtype=float)
            for f in fields(GeneratorParams)}
