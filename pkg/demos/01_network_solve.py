"""
Network solve with machines as current sources
==============================================

Two machines feed a three-bus network with one load.  The stator relations
make each machine's current an affine function of its terminal voltage, so
the whole network reduces to a single linear solve.
"""
import numpy as np

from bicsim import GeneratorParams, Line, LoadAdmittance, build_admittance, solve_network
from bicsim.network import generator_shunts

# machine constants in per unit on the system base
gens = [GeneratorParams(H=5.0, D=2.0, T_d0_prime=6.0, X_d=1.2, X_d_prime=0.3, X_q_prime=0.5, r_a=0.01),
        GeneratorParams(H=4.0, D=2.0, T_d0_prime=7.0, X_d=1.0, X_d_prime=0.25, X_q_prime=0.25, r_a=0.01)]
buses = [0, 1]

# lines and a constant-admittance load at bus 2
lines = [Line(0, 2, 0.01, 0.12), Line(1, 2, 0.02, 0.15), Line(0, 1, 0.01, 0.3, shunt_susceptance=0.05)]
loads = [LoadAdmittance(2, 1.4 - 0.3j)]

# each machine contributes a 1/r_a shunt at its bus
Y = build_admittance(lines, loads, generator_shunts(buses, gens))
print("admittance matrix:\n", np.round(Y, 3))

# rotor angles and transient emfs
sol = solve_network(Y, [(0.25, 1.10), (0.15, 1.05)], gens, buses)
print("\nbus voltages:", np.round(sol.bus_voltages, 4))
print("nodal residual:", sol.residual)
for i, el in enumerate(sol.per_generator):
    print(f"G{i + 1}: i_d={el.i_d:+.4f} i_q={el.i_q:+.4f} T_e={el.T_e:.4f} P={el.P:.4f} Q={el.Q:+.4f}")

# terminal powers add up to the load plus line losses
V = sol.bus_voltages
losses = sum((abs(V[l.from_bus] - V[l.to_bus]) ** 2 * l.series_admittance).real for l in lines)
load = loads[0].admittance.real * abs(V[2]) ** 2
print(f"\ngenerated {sum(el.P for el in sol.per_generator):.6f} = load {load:.6f} + losses {losses:.6f}")
