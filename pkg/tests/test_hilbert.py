import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from collapsesim.errors import ConfigurationError, NumericalContractError, UsageError
from collapsesim.hilbert import (
    LinearOperator,
    StateVector,
    apply_local,
    fock,
    grid,
    ladder,
    make_space,
    norm2,
    number_op,
    register,
    top_level_leakage,
    truncated_coherent,
    unitary_of,
)


def test_dimension_is_product_of_factor_dims():
    space = make_space([register(2), fock(3), grid(5)])
    assert space.shape == (2, 4, 5)
    assert space.dim == 40


def test_bad_factor_sizes_rejected():
    with pytest.raises(ConfigurationError):
        make_space([fock(0)])
    with pytest.raises(ConfigurationError):
        make_space([grid(1)])


def test_ladder_on_fock_basis():
    space = make_space([fock(3), fock(2)])
    a0 = ladder(space, 0, "lower")
    state = space.basis([2, 1])
    out = a0 @ state
    assert np.allclose(out.amplitudes, math.sqrt(2) * space.basis([1, 1]).amplitudes)
    # raising the top level falls off the truncated space
    top = ladder(space, 1, "raise") @ space.basis([0, 2])
    assert norm2(top) == 0.0


def test_ladder_rejects_non_fock_factor():
    space = make_space([grid(3), fock(1)])
    with pytest.raises(UsageError):
        ladder(space, 0, "lower")


def test_number_operator_is_a_dagger_a():
    space = make_space([fock(4), fock(2)])
    low = ladder(space, 0, "lower").matrix
    assert np.allclose(np.diag(number_op(space, 0).diag), low.conj().T @ low)


def test_unitary_of_diagonal_stays_diagonal():
    space = make_space([fock(3)])
    u = unitary_of(number_op(space, 0), 0.3)
    assert u.is_diagonal
    assert np.allclose(u.diag, np.exp(-0.3j * np.arange(4)))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.floats(min_value=-3, max_value=3))
def test_unitary_of_matches_expm(n, angle):
    rng = np.random.default_rng(n)
    m = rng.normal(size=(n + 1, n + 1)) + 1j * rng.normal(size=(n + 1, n + 1))
    h = LinearOperator(make_space([fock(n)]), matrix=m + m.conj().T)
    assert np.allclose(unitary_of(h, angle).matrix, scipy.linalg.expm(-1j * angle * h.matrix), atol=1e-10)


def test_unitary_of_rejects_non_hermitian():
    op = LinearOperator(make_space([fock(1)]), matrix=np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(NumericalContractError):
        unitary_of(op, 1.0)


def test_displacement_of_vacuum_is_coherent():
    # exp(-i theta (a + a^dag)) |0> = |alpha> with alpha = -i theta
    n_max, theta = 30, 0.8
    space = make_space([fock(n_max)])
    low = ladder(space, 0, "lower").matrix
    u = unitary_of(LinearOperator(space, matrix=low + low.conj().T), theta)
    out = u @ space.basis([0])
    target = truncated_coherent(-1j * theta, n_max)
    fidelity = abs(np.vdot(target, out.amplitudes)) ** 2 / np.vdot(target, target).real
    assert fidelity > 1 - 1e-8


def test_truncated_coherent_statistics():
    alpha = 1.3 - 0.4j
    amps = truncated_coherent(alpha, 40)
    p = np.abs(amps) ** 2
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.arange(41) @ p == pytest.approx(abs(alpha) ** 2, rel=1e-10)
    assert truncated_coherent(0.0, 3)[0] == 1.0


def test_apply_local_matches_kron():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=(2, 3, 4)) + 0j
    m = rng.normal(size=(12, 12))
    out = apply_local(psi, m, [2, 1])
    # reference: permute to (axis2, axis1, axis0), act on the leading pair
    ref = np.einsum("ab,bc->ac", m, psi.transpose(2, 1, 0).reshape(12, 2)).reshape(4, 3, 2).transpose(2, 1, 0)
    assert np.allclose(out, ref)


def test_top_level_leakage():
    space = make_space([fock(2), fock(2)])
    amps = np.zeros(9, dtype=complex)
    amps[space.flat_index([0, 0])] = math.sqrt(0.9)
    amps[space.flat_index([0, 2])] = math.sqrt(0.1)
    assert top_level_leakage(StateVector(space, amps)) == pytest.approx(0.1)


def test_state_length_checked():
    with pytest.raises(UsageError):
        StateVector(make_space([fock(1)]), np.ones(3))
