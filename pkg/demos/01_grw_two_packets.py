"""
Spontaneous localization of a split wave packet
===============================================

A particle sits in two Gaussian packets, 30% on the left and 70% on the
right.  Hits arrive as a Poisson process; each one multiplies the wave
function by a Gaussian of width r centred at a random point drawn from the
current position density (smeared by r).  After a few dozen hits one packet
holds essentially all the weight.
"""

import numpy as np

from collapsesim.grw import GrwConfig, run_grw, two_packet_state
from collapsesim.stochastic import rng_stream

r = 0.5
config = GrwConfig(n_sites=256, dx=0.05, hamiltonian="none", lam=50.0, r=r, T=1.0)
state = two_packet_state(config, separation=10 * r, weight_right=0.7, sigma=0.25)
right = config.coords > 0

# %% One trajectory, hit by hit
traj = run_grw(config, state, rng_stream(2024, 0))
print(f"{len(traj.hits)} hits")
w = state.probabilities()[right].sum()
print(f"start: right weight {w:.4f}")
for hit in traj.hits[:8]:
    # the norm ratio post/pre is this hit's likelihood factor
    print(f"t={hit.time:.3f}  z={hit.z:+.3f}  norm ratio {hit.post / hit.pre:.3e}")
print(f"end: right weight {traj.final_state.probabilities()[right].sum():.6f}")

# %% Frequencies over many trajectories follow the initial weights
outcomes = []
for i in range(500):
    final = run_grw(config, state, rng_stream(2024, 1, i)).final_state
    outcomes.append(final.probabilities()[right].sum() > 0.5)
freq = np.mean(outcomes)
print(f"right-hand outcome in {freq:.3f} of 500 runs (weight 0.7, sigma {np.sqrt(0.21 / 500):.3f})")
