import time

import numpy as np
import pytest

from bicsim.engine import Simulation
from bicsim.machine import GeneratorParams
from bicsim.scenario import load_default_scenario

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def machine():
    return GeneratorParams(H=5.0, D=2.0, T_d0_prime=6.0, X_d=1.2, X_d_prime=0.3,
                           X_q_prime=0.5, r_a=0.05)


def power_balance(sim):
    """Generated real power minus load and line losses at the current state."""
    system = sim.scenario.system
    sol = sim.loop().network(sim.x)
    V = sol.bus_voltages
    generated = sum(el.P for el in sol.per_generator)
    losses = 0.0
    for ln in system.lines:
        a, b = ln.from_bus, ln.to_bus
        losses += (abs(V[a] - V[b]) ** 2 * ln.series_admittance).real
    consumed = sum(ld.admittance.real * abs(V[ld.bus]) ** 2 for ld in sim.loads)
    return generated - consumed - losses


@pytest.fixture(scope="session")
def default_run():
    """The shipped scenario, integrated segment by segment with energy checks."""
    scenario = load_default_scenario()
    t0 = time.perf_counter()
    sim = Simulation(scenario)
    balance = {}
    for event in scenario.events:
        target = scenario.step_of(event.time)
        sim.advance(target - sim.step)
        balance[sim.time] = power_balance(sim)
        sim.apply(event)
    sim.advance(scenario.n_steps - sim.step, record_last=True)
    balance[sim.time] = power_balance(sim)
    elapsed = time.perf_counter() - t0
    return dict(scenario=scenario, sim=sim, trajectory=sim.trajectory(), balance=balance,
                elapsed=elapsed)


def ring(n=4):
    A = np.zeros((n, n))
    for i in range(n):
        A[i, (i + 1) % n] = A[(i + 1) % n, i] = 1
    return A
