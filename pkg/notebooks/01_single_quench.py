"""
Quenching a small Ising instance
================================

Build an instance from one data row, run the Trotterized quench at a few
anneal times and watch the local magnetizations move from zero towards the
classical ground state.
"""

# %%
import numpy as np

from quenchmap.encoding import CouplingGraph, encode_sample
from quenchmap.quench import QuenchConfig, evolve, exact_ground_state, expect_z
from quenchmap.schedule import AnnealSchedule

x = np.array([0.8, -0.3, 1.5, -1.1])
couplings = CouplingGraph(4, ((0, 1, -0.5), (1, 2, -0.4), (2, 3, 0.3)))
instance = encode_sample(x, couplings)
print("fields h =", instance.h)

# %%
# Short anneals leave the state near |+>^n; long ones approach the ground state.
for tau in (1e-3, 1.0, 5.0, 20.0, 100.0):
    state = evolve(instance, QuenchConfig(dt_ns=0.01, schedule=AnnealSchedule(tau_ns=tau)))
    z = [expect_z(state, i) for i in range(4)]
    print(f"tau = {tau:7.3f} ns   <Z> =", np.round(z, 4))

# %%
_, ground = exact_ground_state(instance, 0.0)
print("ground state <Z> =", np.round([expect_z(ground, i) for i in range(4)], 4))
