"""
Relativistic lattice model: exact and branch-coherent tiers
===========================================================

Matter in one of two branches sources a free mediating field through causal
kernels.  The exact tier keeps the joint state of a branch register and the
field modes that hits can read; the branch tier keeps one coherent field image
per branch and only reweights the branches.  When every hit reads modes no
earlier hit has read, the two agree to rounding.

The script also scans the commutator of the smeared number operator N(x)
with the smeared field A(x') over all cell pairs of a 6x6 lattice.
"""

import numpy as np

from collapsesim.relmodel import (
    BranchState,
    Hit,
    RelativisticModel,
    RelConfig,
    SpacetimeLattice,
    acausal_control_kernels,
    make_kernels,
    microcausality_scan,
    static_branches,
)
from collapsesim.stochastic import rng_stream

lat = SpacetimeLattice(12, 4)
kern = make_kernels(lat, 1, 1)
branches = static_branches(lat, [np.sqrt(0.5), np.sqrt(0.5)], [[0, 1], [2, 3]], J=0.5)
exact = RelativisticModel(RelConfig(kern, branches, mu=0.0, r=0.5, tier="exact", n_max=12))
branch = RelativisticModel(RelConfig(kern, branches, mu=0.0, r=0.5, tier="branch", mode="enumerate"))
print("overlap of the two field images:", BranchState.from_tracks(kern, branches, branch.tracks).overlap(0, 1))

# %% Same hits, same Z values, both tiers
rng = rng_stream(11, 0)
hits = [Hit(t + 0.5, (t, int(rng.integers(4)))) for t in range(2, 12)]
ex = exact.run(rng, hits=hits)
z_values = {(h.location, 0): h.z for h in ex.hits}
br = branch.run(rng, hits=hits, z_values=z_values)
print(" cell     z       exact w0    branch w0")
for a, b in zip(ex.hits, br.hits):
    print(f"{a.location}  {a.z:+.3f}  {a.weights[0]:.9f}  {b.weights[0]:.9f}")

# %% Microcausality, with the leaking control kernel for contrast
lat6 = SpacetimeLattice(6, 6)
print("causal kernels :", microcausality_scan(make_kernels(lat6, 1, 1), n_max=2))
print("leaking kernels:", microcausality_scan(acausal_control_kernels(lat6, 1, 1), n_max=2))
