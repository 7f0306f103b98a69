"""
Bounded integral states and the weighted Laplacian
==================================================

The integral state of each unit is scaled by ``g(sigma)``, which vanishes at
both ends of the allowed interval.  Only the small leakage ``-k sigma`` is
left there, and it points back inside.  A unit whose ``g`` is zero also
vanishes from the consensus coupling.
"""
import numpy as np

from bicsim import CommGraph, ControllerParams, g_value, vector_derivatives, weighted_laplacian

A = np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]], dtype=float)
graph = CommGraph(A)
print("ring edges:", sorted(graph.edges))

for s in (-4.8, -2.0, 0.0, 0.25, 0.5):
    print(f"g({s:+.2f}) with limits [-4.8, 0.5] = {g_value(s, 0.5, 4.8):.4f}")

print("\nLaplacian with unit 3 saturated:\n", weighted_laplacian(A, np.array([1.0, 1.0, 0.0, 1.0])))

params = ControllerParams(k_T=160, k_P=0.0025, k_E=0.1, k=1e-6,
                          n_gains=[1 / 2, 1 / 4, 1 / 6, 1 / 8], m_gains=[1, 1, 1, 1],
                          dT_max=[2, 7, 0.5, 10], dT_min=[2, 4.36, 4.8, 6.1521],
                          dE_max=[2, 0.2, 2, 2], dE_min=[0.5, 0.5, 0.5, 0.5])

# drive the controllers alone with a frequency deficit and badly shared power
rng = np.random.default_rng(0)
sT, sE = np.zeros(4), np.zeros(4)
dt = 1e-3
low, high = -params.dT_min, params.dT_max
for step in range(20000):
    omega = np.full(4, 0.99)
    P = rng.uniform(0, 10, 4)
    Q = rng.uniform(-1, 1, 4)
    f = lambda a, b: vector_derivatives(A, params, a, b, omega, P, Q)
    k1 = f(sT, sE)
    k2 = f(sT + dt / 2 * k1[0], sE + dt / 2 * k1[1])
    k3 = f(sT + dt / 2 * k2[0], sE + dt / 2 * k2[1])
    k4 = f(sT + dt * k3[0], sE + dt * k3[1])
    sT = sT + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    sE = sE + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    assert np.all(sT <= high) and np.all(sT >= low)

print("\nafter 20 s of sustained under-frequency:")
print("sigma_T      :", np.round(sT, 6))
print("upper limits :", high)
print("gap to limit :", high - sT)
