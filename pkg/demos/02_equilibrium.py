"""
Load flow and machine initialisation
====================================

Before the controller acts the system sits at a load-flow operating point.
Each machine's angle, emf and constant inputs are back-solved from its
terminal voltage and power so that all state derivatives vanish.
"""
import numpy as np

from bicsim import load_default_scenario, solve_network
from bicsim.engine import ClosedLoop
from bicsim.equilibrium import initialize

scenario = load_default_scenario()
system = scenario.system
eq = initialize(system.admittance(), system.gen_buses, system.gen_params, system.dispatch)

print("bus  |V|     angle (deg)")
for b, v in enumerate(eq.bus_voltages):
    print(f"{system.bus_names[b]:>6}  {abs(v):.4f}  {np.degrees(np.angle(v)):8.3f}")

print("\nunit  delta(deg)  E'_q    T_m^n   E_f^n")
for i, s in enumerate(eq.states):
    print(f"G{i + 1}    {np.degrees(s.delta):9.3f}  {s.E_q_prime:.4f}  {eq.T_m_nominal[i]:.4f}  {eq.E_f_nominal[i]:.4f}")

# the back-solved point is an equilibrium of the full model
params = scenario.controller.with_nominal(eq.T_m_nominal, eq.E_f_nominal)
loop = ClosedLoop(system, params, scenario.graph)
x0 = np.concatenate([[s.delta for s in eq.states], [s.omega for s in eq.states],
                     [s.E_q_prime for s in eq.states], np.zeros(2 * system.n_gen)])
print("\nmax |dx/dt| at the initial point:", np.max(np.abs(loop.derivative(0.0, x0))))
