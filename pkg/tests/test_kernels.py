import itertools

import numpy as np
import pytest

from collapsesim.errors import ConfigurationError, UsageError
from collapsesim.hilbert import ladder, make_space, fock
from collapsesim.relmodel import (
    ModeSpace,
    SpacetimeLattice,
    acausal_control_kernels,
    causal_relation,
    commutator_norm,
    interaction_generator,
    make_kernels,
    smeared_A,
    smeared_N,
    support_violations,
    window_modes,
)
from collapsesim.relmodel.kernels import _sparse_commutator_norm


def test_f_normalized_and_g_peak():
    kern = make_kernels(SpacetimeLattice(5, 5), 2, 1, g0=0.7, profile="cone_gaussian", s=1.5)
    assert sum(w for _, w in kern.f_offsets) == pytest.approx(1.0)
    assert max(w for _, w in kern.g_offsets) == pytest.approx(0.7)
    assert kern.d_f == 2 and kern.d_g == 1


def test_windows_inside_cones():
    lat = SpacetimeLattice(6, 6)
    kern = make_kernels(lat, 2, 2)
    assert support_violations(kern) == []
    x = (3, 2)
    assert all(causal_relation(lat, x, y) == "past" for y, _ in kern.f_window(x))
    assert all(causal_relation(lat, x, y) == "future" for y, _ in kern.g_window(x))
    assert len(kern.f_window(x)) == 3 + 5


def test_control_kernel_is_flagged():
    kern = acausal_control_kernels(SpacetimeLattice(6, 6), 1, 1, leak=0.4)
    bad = support_violations(kern)
    assert ("f", (1, -2)) in bad and ("f", (1, 2)) in bad
    assert not kern.causal
    assert sum(w for _, w in kern.f_offsets) == pytest.approx(1.0)


def test_windows_clip_at_edges():
    kern = make_kernels(SpacetimeLattice(4, 4), 1, 1)
    assert [y for y, _ in kern.f_window((0, 0))] == []
    assert sorted(y for y, _ in kern.g_window((3, 0))) == []
    assert sorted(y for y, _ in kern.f_window((1, 0))) == [(0, 0), (0, 1)]


def test_bad_kernel_arguments():
    lat = SpacetimeLattice(3, 3)
    with pytest.raises(ConfigurationError):
        make_kernels(lat, 0, 1)
    with pytest.raises(ConfigurationError):
        make_kernels(lat, 1, 1, profile="boxcar")


def test_vacuum_second_moment_of_A():
    kern = make_kernels(SpacetimeLattice(5, 5), 1, 1, g0=0.6, profile="cone_gaussian", s=1.0)
    x = (1, 2)
    modes = ModeSpace(tuple(window_modes(kern, g_cells=[x])), n_max=2)
    a = smeared_A(x, kern, modes).matrix
    second = (a @ a)[0, 0].real
    assert second == pytest.approx(sum(w * w for _, w in kern.g_window(x)), rel=1e-12)


def test_commutator_matches_mode_sum():
    # [N(x), A(x')] = sum_y f(x,y) g(x',y) (a_y^dag - a_y)
    lat = SpacetimeLattice(5, 5)
    kern = make_kernels(lat, 1, 1, g0=0.8, profile="cone_gaussian", s=1.2)
    x, xp = (2, 2), (0, 1)
    modes = ModeSpace(tuple(window_modes(kern, [x], [xp])), n_max=3)
    comm = smeared_N(x, kern, modes).dense() @ smeared_A(xp, kern, modes).dense()
    comm = comm - smeared_A(xp, kern, modes).dense() @ smeared_N(x, kern, modes).dense()
    ref = np.zeros_like(comm)
    for y in modes.cells:
        low = ladder(modes.space, modes.factor_of(y), "lower").matrix
        ref += kern.f(x, y) * kern.g(xp, y) * (low.conj().T - low)
    assert np.abs(ref).max() > 0.01
    assert np.abs(comm - ref).max() < 1e-10


def test_sparse_scan_agrees_with_dense():
    lat = SpacetimeLattice(5, 5)
    for kern in (make_kernels(lat, 1, 1), acausal_control_kernels(lat, 1, 1)):
        cells = list(lat.cells())
        for x, xp in itertools.islice(itertools.product(cells, cells), 0, None, 23):
            modes = ModeSpace(tuple(window_modes(kern, [x], [xp])), n_max=2)
            if not modes.cells:
                continue
            dense = commutator_norm(smeared_N(x, kern, modes), smeared_A(xp, kern, modes))
            assert _sparse_commutator_norm(x, xp, kern, modes) == pytest.approx(dense, abs=1e-14)


def test_strict_window_coverage():
    kern = make_kernels(SpacetimeLattice(4, 4), 1, 1)
    modes = ModeSpace(((0, 0),), n_max=1)
    with pytest.raises(ConfigurationError):
        smeared_N((1, 1), kern, modes)
    assert smeared_N((1, 1), kern, modes, strict=False).diag.max() == pytest.approx(1 / 3)


def test_interaction_generator_is_branch_diagonal():
    kern = make_kernels(SpacetimeLattice(3, 3), 1, 1)
    x = (0, 1)
    modes = ModeSpace(tuple(window_modes(kern, g_cells=[x])), n_max=1, n_branches=2)
    h = interaction_generator(x, kern, modes, [0.0, 0.5])
    assert h.is_hermitian
    n = make_space([fock(1)] * 3).dim
    assert np.abs(h.matrix[:n, :n]).max() == 0.0
    assert np.abs(h.matrix[:n, n:]).max() == 0.0
    with pytest.raises(UsageError):
        interaction_generator(x, kern, modes, [1.0])
