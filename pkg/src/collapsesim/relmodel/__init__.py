"""Relativistic reduction model on a 1+1D lattice with a static mediating field."""

from .branch import BranchState, branch_tracks, occupation_distribution, track_moments
from .exact import ExactState, exact_dimension, excitable_modes
from .kernels import (
    CausalKernelPair,
    ModeSpace,
    acausal_control_kernels,
    commutator_norm,
    microcausality_scan,
    interaction_generator,
    make_kernels,
    smeared_A,
    smeared_N,
    support_violations,
    window_modes,
)
from .lattice import (
    Hypersurface,
    SpacetimeLattice,
    causal_relation,
    greedy_order,
    random_admissible_order,
    time_major_order,
)
from .matter import MatterBranchSet, cell_branches, static_branches
from .runner import (
    Hit,
    RelConfig,
    RelativisticModel,
    apply_rel_hit,
    joint_probability,
    reduction_time,
    run_relativistic,
    sample_rel_Z,
    sprinkle_hits,
    static_reduction_time,
    steady_moments,
    tomonaga_step,
)
