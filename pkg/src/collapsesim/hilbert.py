"""Truncated Hilbert spaces, ladder operators and Hermitian exponentials.

A :class:`HilbertSpace` is an ordered tensor product of factors.  Three factor
kinds are supported:

* ``fock(n_max)`` -- one bosonic mode with occupancy ``0..n_max``
* ``grid(n_sites)`` -- a particle position register
* ``register(K)`` -- a K-way branch label

Basis states are enumerated in C order over the factors, so the amplitude
array of a :class:`StateVector` can be reshaped to ``space.shape`` whenever a
tensor view is convenient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, NumericalContractError, UsageError

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class Factor:
    kind: str
    size: int

    @property
    def dim(self) -> int:
        return self.size + 1 if self.kind == "fock" else self.size


def fock(n_max: int) -> Factor:
    return Factor("fock", int(n_max))


def grid(n_sites: int) -> Factor:
    return Factor("grid", int(n_sites))


def register(k: int) -> Factor:
    return Factor("register", int(k))


_MIN_SIZE = {"fock": 1, "grid": 2, "register": 1}


@dataclass(frozen=True)
class HilbertSpace:
    factors: tuple[Factor, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.factors else 1

    def multi_index(self, index: int | np.ndarray) -> tuple:
        return np.unravel_index(index, self.shape)

    def flat_index(self, multi: Sequence[int] | tuple[np.ndarray, ...]) -> int | np.ndarray:
        return np.ravel_multi_index(tuple(multi), self.shape)

    def basis(self, multi: Sequence[int]) -> StateVector:
        amps = np.zeros(self.dim, dtype=complex)
        amps[self.flat_index(multi)] = 1.0
        return StateVector(self, amps)

    def occupation(self, factor_index: int) -> np.ndarray:
        """Occupancy (or site/label index) of one factor for every basis state."""
        shape = [1] * len(self.factors)
        shape[factor_index] = self.factors[factor_index].dim
        values = np.arange(self.factors[factor_index].dim, dtype=float).reshape(shape)
        return np.broadcast_to(values, self.shape).reshape(-1)


def make_space(factors: Sequence[Factor]) -> HilbertSpace:
    """Build a space, validating each factor size.

    >>> make_space([register(2), fock(1), fock(1)]).dim
    8
    """
    for f in factors:
        if f.kind not in _MIN_SIZE:
            raise ConfigurationError(f"unknown factor kind {f.kind!r}")
        if f.size < _MIN_SIZE[f.kind]:
            raise ConfigurationError(
                f"{f.kind} factor needs size >= {_MIN_SIZE[f.kind]}, got {f.size}"
            )
    return HilbertSpace(tuple(factors))


@dataclass
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != self.space.dim:
            raise UsageError(
                f"amplitude length {self.amplitudes.size} != space dim {self.space.dim}"
            )

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.shape)

    def normalized(self) -> StateVector:
        return StateVector(self.space, self.amplitudes / np.sqrt(norm2(self)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Operator stored either as a diagonal over the basis or as a dense matrix."""

    space: HilbertSpace
    diag: np.ndarray | None = None
    matrix: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if (self.diag is None) == (self.matrix is None):
            raise UsageError("exactly one of diag or matrix must be given")
        n = self.space.dim
        if self.diag is not None and self.diag.shape != (n,):
            raise UsageError(f"diagonal must have shape ({n},)")
        if self.matrix is not None and self.matrix.shape != (n, n):
            raise UsageError(f"matrix must have shape ({n}, {n})")

    @property
    def is_diagonal(self) -> bool:
        return self.diag is not None

    def dense(self) -> np.ndarray:
        if self.is_diagonal:
            return np.diag(self.diag.astype(complex))
        return self.matrix

    def dagger(self) -> LinearOperator:
        if self.is_diagonal:
            return LinearOperator(self.space, diag=np.conj(self.diag))
        return LinearOperator(self.space, matrix=self.matrix.conj().T)

    def hermiticity_error(self) -> float:
        if self.is_diagonal:
            return float(np.max(np.abs(np.imag(self.diag)), initial=0.0))
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    @property
    def is_hermitian(self) -> bool:
        return self.hermiticity_error() < HERMITIAN_TOL

    def _check(self, other: LinearOperator):
        if other.space != self.space:
            raise UsageError("operators act on different spaces")

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return apply(self, other)
        self._check(other)
        if self.is_diagonal and other.is_diagonal:
            return LinearOperator(self.space, diag=self.diag * other.diag)
        if self.is_diagonal:
            return LinearOperator(self.space, matrix=self.diag[:, None] * other.matrix)
        if other.is_diagonal:
            return LinearOperator(self.space, matrix=self.matrix * other.diag[None, :])
        return LinearOperator(self.space, matrix=self.matrix @ other.matrix)

    def __add__(self, other: LinearOperator) -> LinearOperator:
        self._check(other)
        if self.is_diagonal and other.is_diagonal:
            return LinearOperator(self.space, diag=self.diag + other.diag)
        return LinearOperator(self.space, matrix=self.dense() + other.dense())

    def __sub__(self, other: LinearOperator) -> LinearOperator:
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> LinearOperator:
        if self.is_diagonal:
            return LinearOperator(self.space, diag=scalar * self.diag)
        return LinearOperator(self.space, matrix=scalar * self.matrix)

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached eigendecomposition of a Hermitian dense operator."""
        if "eigh" not in self._cache:
            self._cache["eigh"] = np.linalg.eigh(self.dense())
        return self._cache["eigh"]


def identity(space: HilbertSpace) -> LinearOperator:
    return LinearOperator(space, diag=np.ones(space.dim))


def _fock_factor(space: HilbertSpace, mode_index: int) -> Factor:
    try:
        factor = space.factors[mode_index]
    except IndexError:
        raise UsageError(f"no factor {mode_index} in a {len(space.factors)}-factor space")
    if factor.kind != "fock":
        raise UsageError(f"factor {mode_index} is {factor.kind}, not fock")
    return factor


def _embed(space: HilbertSpace, factor_index: int, local: np.ndarray) -> np.ndarray:
    left = math.prod(f.dim for f in space.factors[:factor_index])
    right = math.prod(f.dim for f in space.factors[factor_index + 1 :])
    return np.kron(np.eye(left), np.kron(local, np.eye(right)))


def ladder_matrix(n_max: int, kind: str) -> np.ndarray:
    """Single-mode truncated lowering/raising matrix."""
    lower = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)
    if kind == "lower":
        return lower
    if kind == "raise":
        return lower.T.copy()
    raise UsageError(f"ladder kind must be 'raise' or 'lower', got {kind!r}")


def ladder(space: HilbertSpace, mode_index: int, kind: str) -> LinearOperator:
    factor = _fock_factor(space, mode_index)
    return LinearOperator(space, matrix=_embed(space, mode_index, ladder_matrix(factor.size, kind)))


def number_op(space: HilbertSpace, mode_index: int) -> LinearOperator:
    _fock_factor(space, mode_index)
    return LinearOperator(space, diag=space.occupation(mode_index))


def position_op(space: HilbertSpace, factor_index: int, coords: np.ndarray) -> LinearOperator:
    """Diagonal position operator for a grid factor with the given site coordinates."""
    if space.factors[factor_index].kind != "grid":
        raise UsageError(f"factor {factor_index} is not a grid")
    idx = space.occupation(factor_index).astype(int)
    return LinearOperator(space, diag=np.asarray(coords, dtype=float)[idx])


def apply(op: LinearOperator, state: StateVector) -> StateVector:
    if op.space != state.space:
        raise UsageError("operator and state live in different spaces")
    if op.is_diagonal:
        return StateVector(state.space, op.diag * state.amplitudes)
    return StateVector(state.space, op.matrix @ state.amplitudes)


def inner(a: StateVector, b: StateVector) -> complex:
    if a.space != b.space:
        raise UsageError("states live in different spaces")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def norm2(state: StateVector) -> float:
    return float(np.vdot(state.amplitudes, state.amplitudes).real)


def expectation(op: LinearOperator, state: StateVector) -> complex:
    return inner(state, apply(op, state)) / norm2(state)


def unitary_of(op: LinearOperator, angle: float) -> LinearOperator:
    """Return ``exp(-i * angle * op)`` for a Hermitian operator.

    Diagonal operators are exponentiated element-wise and stay diagonal; dense
    ones go through a (cached) eigendecomposition.  The result is checked for
    unitarity before it is returned.
    """
    if not op.is_hermitian:
        raise NumericalContractError(
            f"generator is not Hermitian (max |M - M^dag| = {op.hermiticity_error():.3e})"
        )
    if op.is_diagonal:
        return LinearOperator(op.space, diag=np.exp(-1j * angle * op.diag.real))
    w, v = op.eigh()
    u = (v * np.exp(-1j * angle * w)) @ v.conj().T
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0)
    if err >= UNITARY_TOL:
        raise NumericalContractError(f"exponential failed unitarity check ({err:.3e})")
    return LinearOperator(op.space, matrix=u)


def commutator(a: LinearOperator, b: LinearOperator) -> LinearOperator:
    return a @ b - b @ a


def apply_local(tensor: np.ndarray, matrix: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply ``matrix`` to the sub-tensor spanned by ``axes`` of ``tensor``.

    ``matrix`` acts on the C-ordered product of the listed axes.
    """
    axes = list(axes)
    rest = [i for i in range(tensor.ndim) if i not in axes]
    moved = np.transpose(tensor, axes + rest)
    local_dim = int(np.prod([tensor.shape[i] for i in axes], dtype=np.int64))
    out = (matrix @ moved.reshape(local_dim, -1)).reshape(moved.shape)
    return np.transpose(out, np.argsort(axes + rest))


def top_level_leakage(state: StateVector) -> float:
    """Largest probability found on the top occupancy level of any fock factor."""
    probs = state.probabilities().reshape(state.space.shape)
    total = probs.sum()
    worst = 0.0
    for i, f in enumerate(state.space.factors):
        if f.kind == "fock":
            worst = max(worst, float(np.take(probs, f.size, axis=i).sum() / total))
    return worst


def truncated_coherent(alpha: complex, n_max: int) -> np.ndarray:
    """Coherent-state amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)`` for n <= n_max (not renormalized)."""
    n = np.arange(n_max + 1)
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    mag = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * log_fact)
    mag[0] = np.exp(-0.5 * abs(alpha) ** 2)
    return mag * np.exp(1j * n * np.angle(alpha))
