import math

import numpy as np
import pytest
from scipy import integrate, stats

from collapsesim.errors import ConfigurationError, OrderingError
from collapsesim.relmodel import (
    BranchState,
    ExactState,
    Hit,
    RelativisticModel,
    RelConfig,
    SpacetimeLattice,
    branch_tracks,
    cell_branches,
    exact_dimension,
    excitable_modes,
    joint_probability,
    make_kernels,
    occupation_distribution,
    reduction_time,
    static_branches,
    static_reduction_time,
    time_major_order,
    track_moments,
    window_modes,
)
from collapsesim.stochastic import rng_stream


def _static(n_t=8, n_x=4, J=0.5, cols=([0, 1], [2, 3]), weights=(0.5, 0.5), a_x=1.0):
    lat = SpacetimeLattice(n_t, n_x, 1.0, a_x)
    kern = make_kernels(lat, 1, 1)
    return kern, static_branches(lat, np.sqrt(weights), list(cols), J=J)


# ---- branch tier


def test_tracks_equal_stepwise_displacements():
    kern, br = _static(n_t=5, n_x=4)
    state = BranchState(kern, br)
    for c in time_major_order(kern.lattice):
        state.step(c)
    assert np.allclose(state.alpha, branch_tracks(kern, br))


def test_tracks_are_linear_in_source():
    kern, _ = _static()
    lat = kern.lattice
    a = cell_branches(lat, [1.0], [{(1, 1): 0.3}])
    b = cell_branches(lat, [1.0], [{(2, 3): 0.7}])
    both = cell_branches(lat, [1.0], [{(1, 1): 0.3, (2, 3): 0.7}])
    assert np.allclose(branch_tracks(kern, both), branch_tracks(kern, a) + branch_tracks(kern, b))


def test_single_source_displacement_value():
    lat = SpacetimeLattice(3, 3)
    kern = make_kernels(lat, 1, 1, g0=0.8)
    br = cell_branches(lat, [1.0], [{(0, 1): 0.5}])
    alpha = branch_tracks(kern, br)
    # -i dV J g in the three future-window cells, zero elsewhere
    assert np.allclose(alpha[0, 1], -1j * 0.5 * 0.8)
    assert np.count_nonzero(alpha) == 3


def test_moments_match_enumerated_distribution():
    kern, br = _static(J=1.2)
    state = BranchState.from_tracks(kern, br, branch_tracks(kern, br), "enumerate")
    m, v = state.moments((4, 1))
    vals, probs = state.n_distribution(0, (4, 1))
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert probs @ vals == pytest.approx(m[0], rel=1e-9)
    assert probs @ (vals - m[0]) ** 2 == pytest.approx(v[0], rel=1e-8)


def test_occupation_distribution_two_modes():
    vals, probs = occupation_distribution(np.array([0.5, 1.5]), np.array([0.5, 0.5]), decimals=10)
    # N = (n1 + n2) / 2 with n1 + n2 ~ Poisson(2)
    ref = stats.poisson(2.0).pmf(np.round(2 * vals).astype(int))
    assert np.allclose(probs, ref, atol=1e-12)


def _clt_gap(J):
    kern, br = _static(n_t=8, n_x=6, J=J, cols=([0, 1, 2], [3, 4, 5]))
    alpha = branch_tracks(kern, br)
    clt = BranchState.from_tracks(kern, br, alpha, "clt")
    enum = BranchState.from_tracks(kern, br, alpha, "enumerate")
    cell = (5, 1)
    m = clt.moments(cell)[0][0]
    zs = np.linspace(m - 4, m + 4, 17)
    a = np.array([clt.hit_densities(cell, z, 1.0)[0] for z in zs])
    b = np.array([enum.hit_densities(cell, z, 1.0)[0] for z in zs])
    return m, np.max(np.abs(a - b)) / b.max()


def test_clt_approaches_enumerate_with_occupancy():
    m_low, gap_low = _clt_gap(2.2)
    m_high, gap_high = _clt_gap(3.0)
    assert m_high > 50
    assert gap_high < 0.02
    assert gap_high < gap_low


def test_overlap_formula():
    kern, br = _static(J=0.5)
    state = BranchState.from_tracks(kern, br, branch_tracks(kern, br))
    d2 = np.sum(np.abs(state.alpha[0] - state.alpha[1]) ** 2)
    assert state.overlap(0, 1) == pytest.approx(math.exp(-0.5 * d2))
    assert state.overlap(0, 0) == 1.0


def test_branch_hit_before_cut_rejected():
    kern, br = _static()
    with pytest.raises(OrderingError):
        BranchState(kern, br).hit((2, 1), 0.0, 1.0)


# ---- exact tier


def test_exact_occupations_match_coherent_tracks():
    kern, br = _static(n_t=4, n_x=2, J=0.6, cols=([0],), weights=(1.0,))
    state = ExactState(kern, br, n_max=8, lazy=False, eliminate=False)
    for c in time_major_order(kern.lattice):
        state.step(c)
    occ = state.mode_occupations()
    alpha = branch_tracks(kern, br)[0]
    assert occ
    for (t, j), n in occ.items():
        assert n == pytest.approx(abs(alpha[t, j]) ** 2, abs=1e-6)


def test_lazy_and_eager_give_same_populations():
    lat = SpacetimeLattice(3, 4)
    kern = make_kernels(lat, 1, 1)
    br = cell_branches(lat, [math.sqrt(0.5), math.sqrt(0.5)], [{(0, 0): 1.5}, {(0, 3): 1.5}])
    rng = rng_stream(1, 0)
    cells = [(2, 0), (2, 1), (2, 2), (2, 3)]
    hits = [Hit(2.0 + 0.01 * i, cells[int(rng.integers(4))]) for i in range(8)]
    eager = RelativisticModel(RelConfig(kern, br, 0.0, 2.0, tier="exact", n_max=20, lazy=False)).run(rng_stream(2, 0), hits=hits)
    z = {}
    for h in eager.hits:
        i = sum(1 for key in z if key[0] == h.location)
        z[(h.location, i)] = h.z
    lazy = RelativisticModel(RelConfig(kern, br, 0.0, 2.0, tier="exact", n_max=20)).run(None, hits=hits, z_values=z)
    for a, b in zip(eager.hits, lazy.hits):
        assert a.weights == pytest.approx(b.weights, abs=1e-10)
        assert a.post / a.pre == pytest.approx(b.post / b.pre, rel=1e-9)
    assert not lazy.flags["invalid"]


def test_exact_norm_preserved_by_steps():
    lat = SpacetimeLattice(4, 3)
    kern = make_kernels(lat, 1, 1)
    br = cell_branches(lat, [math.sqrt(0.5), math.sqrt(0.5)], [{(0, 0): 0.4}, {(0, 2): 0.4, (1, 1): 0.3}])
    state = ExactState(kern, br, n_max=6, lazy=False, eliminate=False)
    for c in time_major_order(kern.lattice):
        state.step(c)
        assert state.norm2() == pytest.approx(1.0, abs=1e-12)
    assert state.populations() == pytest.approx([0.5, 0.5])


def test_exact_dimension_counts():
    kern, br = _static(n_t=4, n_x=4, cols=([0], [3]))
    modes = excitable_modes(kern, br)
    assert modes == window_modes(kern, g_cells=br.support())
    assert exact_dimension(kern, br, 2, lazy=False) == 2 * 3 ** len(modes)
    per_row = max(sum(1 for y in modes if y[0] == t) for t in range(4))
    assert exact_dimension(kern, br, 2) == 2 * 3**per_row


def test_dimension_cap_enforced():
    kern, br = _static(n_t=4, n_x=6, cols=([0, 1, 2], [3, 4, 5]))
    state = ExactState(kern, br, n_max=8, dim_cap=1000, lazy=False)
    with pytest.raises(ConfigurationError, match="exceeds cap"):
        for c in time_major_order(kern.lattice):
            state.step(c)


def test_exact_spectral_weights_are_poisson():
    lat = SpacetimeLattice(3, 1)
    kern = make_kernels(lat, 1, 1)
    br = cell_branches(lat, [1.0], [{(0, 0): 0.8}])
    state = ExactState(kern, br, n_max=12)
    for c in [(0, 0), (1, 0), (2, 0)]:
        state.step(c)
    w = state.spectral_weights((2, 0))
    # the mode was displaced by -i 0.8, so n is Poisson(0.64); on one column f reads n / 3
    ref = stats.poisson(0.64).pmf(np.round(3 * w.eigenvalues).astype(int))
    assert np.allclose(w.weights / w.total, ref, atol=1e-8)


# ---- runner


def test_single_hit_joint_density_integrates_to_one():
    kern, br = _static(n_t=6, J=0.9)
    cfg = RelConfig(kern, br, 0.0, 0.8, mode="enumerate")
    model = RelativisticModel(cfg)
    cell = (4, 1)

    def density(z):
        rec = model.run(None, hits=[Hit(4.5, cell)], z_values={(cell, 0): z})
        return joint_probability(rec)

    val, _ = integrate.quad(density, -8, 12, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_fast_and_generic_branch_runners_agree():
    kern, br = _static(n_t=10, J=0.7)
    cfg = RelConfig(kern, br, 0.0, 1.0, mode="enumerate")
    model = RelativisticModel(cfg)
    hits = [Hit(t + 0.5, (t, t % 4)) for t in range(2, 10)]
    fast = model.run(rng_stream(0), hits=hits)
    z = {(h.location, 0): h.z for h in fast.hits}
    slow = model.run(None, hits=hits, order=time_major_order(kern.lattice), z_values=z)
    for a, b in zip(fast.hits, slow.hits):
        assert a.weights == pytest.approx(b.weights, abs=1e-12)


def test_static_sampler_matches_trajectory_runner():
    # drawing one branch up front and all Z from it has the same law as per-hit draws
    lat = SpacetimeLattice(40, 6, 1.0, 2.0)
    kern = make_kernels(lat, 1, 1)
    br = static_branches(lat, [math.sqrt(0.3), math.sqrt(0.7)], [[1], [4]], J=0.5)
    cfg = RelConfig(kern, br, 0.4, 1.0)
    model = RelativisticModel(cfg)
    generic = []
    for i in range(400):
        t = reduction_time(model.run(rng_stream(1, i)), 0.99)
        generic.append(np.inf if t is None else t)
    static = []
    for i in range(400):
        t = static_reduction_time(cfg, rng_stream(2, i), max_time=lat.n_t * lat.a_t)
        static.append(np.inf if t is None else t)
    generic, static = np.array(generic), np.array(static)
    assert np.isfinite(generic).mean() > 0.9
    assert stats.ks_2samp(np.minimum(generic, 99), np.minimum(static, 99)).pvalue > 0.01


def test_reduction_time_reports_first_crossing():
    kern, br = _static(n_t=30, J=0.8)
    rec = RelativisticModel(RelConfig(kern, br, 1.0, 1.0)).run(rng_stream(3))
    t = reduction_time(rec, 0.99)
    assert t is not None
    first = next(h for h in rec.hits if max(h.weights) >= 0.99)
    assert t == first.time


def test_config_rejects_bad_values():
    kern, br = _static()
    with pytest.raises(ConfigurationError):
        RelConfig(kern, br, -1.0, 1.0)
    with pytest.raises(ConfigurationError):
        RelConfig(kern, br, 1.0, 0.0)
    with pytest.raises(ConfigurationError):
        RelConfig(kern, br, 1.0, 1.0, tier="other")


def test_track_moments_shapes():
    kern, br = _static()
    m, v = track_moments(kern, branch_tracks(kern, br))
    assert m.shape == v.shape == (2, 8, 4)
    assert np.all(v <= m + 1e-15)
