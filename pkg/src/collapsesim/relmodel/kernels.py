"""Causal smearing kernels and the smeared operators built from them.

``f(x, y)`` weights mediating-field occupations in the causal past of ``x``
(it defines ``N(x) = sum_y f(x,y) n(y)``); ``g(x, y)`` weights field
operators in the causal future of ``x`` (``A(x) = sum_y g(x,y) (a(y) + a(y)^dag)``).
Both are stored as translation-invariant offset templates; cells outside the
lattice simply drop out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from ..errors import ConfigurationError, UsageError
from ..hilbert import HilbertSpace, LinearOperator, fock, ladder, make_space, register
from .lattice import Cell, SpacetimeLattice, causal_relation

Offset = tuple[int, int]


@dataclass(frozen=True)
class CausalKernelPair:
    lattice: SpacetimeLattice
    f_offsets: tuple[tuple[Offset, float], ...]  # y = (t - dt, j + dj)
    g_offsets: tuple[tuple[Offset, float], ...]  # y = (t + dt, j + dj)
    causal: bool = True

    @property
    def d_f(self) -> int:
        return max(dt for (dt, _), _ in self.f_offsets)

    @property
    def d_g(self) -> int:
        return max(dt for (dt, _), _ in self.g_offsets)

    def f_window(self, x: Cell) -> list[tuple[Cell, float]]:
        out = []
        for (dt, dj), w in self.f_offsets:
            y = (x[0] - dt, x[1] + dj)
            if self.lattice.contains(y):
                out.append((y, w))
        return out

    def g_window(self, x: Cell) -> list[tuple[Cell, float]]:
        out = []
        for (dt, dj), w in self.g_offsets:
            y = (x[0] + dt, x[1] + dj)
            if self.lattice.contains(y):
                out.append((y, w))
        return out

    def f(self, x: Cell, y: Cell) -> float:
        key = (x[0] - y[0], y[1] - x[1])
        return dict(self.f_offsets).get(key, 0.0) if self.lattice.contains(y) else 0.0

    def g(self, x: Cell, y: Cell) -> float:
        key = (y[0] - x[0], y[1] - x[1])
        return dict(self.g_offsets).get(key, 0.0) if self.lattice.contains(y) else 0.0


def _cone_offsets(lattice: SpacetimeLattice, depth: int) -> list[Offset]:
    c = lattice.cone_slope
    return [(dt, dj) for dt in range(1, depth + 1) for dj in range(-c * dt, c * dt + 1)]


def _profile_weight(lattice: SpacetimeLattice, dj: int, profile: str, s: float) -> float:
    if profile == "uniform":
        return 1.0
    if profile == "cone_gaussian":
        return math.exp(-0.5 * (dj * lattice.a_x / s) ** 2)
    raise ConfigurationError(f"unknown kernel profile {profile!r}")


def make_kernels(
    lattice: SpacetimeLattice,
    d_f: int,
    d_g: int,
    g0: float = 1.0,
    profile: str = "uniform",
    s: float = 1.0,
) -> CausalKernelPair:
    """Kernels supported on the first ``d_f`` past / ``d_g`` future rows of the light cone.

    ``f`` sums to one over its template; ``g`` has peak amplitude ``g0``.
    """
    if d_f < 1 or d_g < 1:
        raise ConfigurationError(f"kernel depths must be >= 1 (got d_f={d_f}, d_g={d_g})")
    f = [(o, _profile_weight(lattice, o[1], profile, s)) for o in _cone_offsets(lattice, d_f)]
    total = sum(w for _, w in f)
    f = tuple((o, w / total) for o, w in f)
    g = tuple((o, g0 * _profile_weight(lattice, o[1], profile, s)) for o in _cone_offsets(lattice, d_g))
    return CausalKernelPair(lattice, f, g)


def acausal_control_kernels(
    lattice: SpacetimeLattice, d_f: int, d_g: int, g0: float = 1.0, leak: float = 0.5
) -> CausalKernelPair:
    """Negative control: ``f`` also reaches the spacelike cells just outside its past cone."""
    base = make_kernels(lattice, d_f, d_g, g0)
    c = lattice.cone_slope
    f = [(o, (1 - leak) * w) for o, w in base.f_offsets]
    f += [((1, -(c + 1)), leak / 2), ((1, c + 1), leak / 2)]
    return CausalKernelPair(lattice, tuple(f), base.g_offsets, causal=False)


def support_violations(kernels: CausalKernelPair) -> list[tuple[str, Offset]]:
    """Offsets whose cells are not strictly inside the proper past (f) or future (g) cone."""
    bad = []
    lat = kernels.lattice
    for (dt, dj), w in kernels.f_offsets:
        if w != 0 and not (dt >= 1 and lat.in_cone(dt, dj)):
            bad.append(("f", (dt, dj)))
    for (dt, dj), w in kernels.g_offsets:
        if w != 0 and not (dt >= 1 and lat.in_cone(dt, dj)):
            bad.append(("g", (dt, dj)))
    return bad


@dataclass(frozen=True)
class ModeSpace:
    """Hilbert space of an optional K-way branch register and one Fock mode per listed cell."""

    cells: tuple[Cell, ...]
    n_max: int
    n_branches: int = 0

    @property
    def space(self) -> HilbertSpace:
        head = [register(self.n_branches)] if self.n_branches else []
        return make_space(head + [fock(self.n_max)] * len(self.cells))

    @property
    def offset(self) -> int:
        return 1 if self.n_branches else 0

    def factor_of(self, cell: Cell) -> int | None:
        try:
            return self.cells.index(cell) + self.offset
        except ValueError:
            return None


def window_modes(kernels: CausalKernelPair, f_cells: Sequence[Cell] = (), g_cells: Sequence[Cell] = ()) -> list[Cell]:
    """Sorted union of the f-windows of ``f_cells`` and g-windows of ``g_cells``."""
    cells = set()
    for x in f_cells:
        cells.update(y for y, _ in kernels.f_window(x))
    for x in g_cells:
        cells.update(y for y, _ in kernels.g_window(x))
    return sorted(cells)


def _require(modes: ModeSpace, window, strict: bool):
    missing = [y for y, _ in window if modes.factor_of(y) is None]
    if strict and missing:
        raise ConfigurationError(f"mode space does not cover kernel window cells {missing}")


def smeared_N(x: Cell, kernels: CausalKernelPair, modes: ModeSpace, strict: bool = True) -> LinearOperator:
    window = kernels.f_window(x)
    _require(modes, window, strict)
    space = modes.space
    diag = np.zeros(space.dim)
    for y, w in window:
        i = modes.factor_of(y)
        if i is not None:
            diag += w * space.occupation(i)
    return LinearOperator(space, diag=diag)


def smeared_A(x: Cell, kernels: CausalKernelPair, modes: ModeSpace, strict: bool = True) -> LinearOperator:
    window = kernels.g_window(x)
    _require(modes, window, strict)
    space = modes.space
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    for y, w in window:
        i = modes.factor_of(y)
        if i is not None:
            low = ladder(space, i, "lower").matrix
            mat += w * (low + low.conj().T)
    return LinearOperator(space, matrix=mat)


def interaction_generator(
    x: Cell, kernels: CausalKernelPair, modes: ModeSpace, sources: Sequence[float]
) -> LinearOperator:
    """``H_int(x) = sum_k J_k(x) |k><k| (x) A(x)`` on a register-carrying mode space."""
    if modes.n_branches != len(sources):
        raise UsageError("need one source value per branch register state")
    a = smeared_A(x, kernels, modes).matrix
    label = modes.space.occupation(0).astype(int)
    j_diag = np.asarray(sources, dtype=float)[label]
    return LinearOperator(modes.space, matrix=j_diag[:, None] * a)


def commutator_norm(op1: LinearOperator, op2: LinearOperator) -> float:
    """Largest element magnitude of ``[op1, op2]``."""
    comm = op1 @ op2 - op2 @ op1
    data = comm.diag if comm.is_diagonal else comm.matrix
    return float(np.max(np.abs(data), initial=0.0))


def _sparse_commutator_norm(x: Cell, xp: Cell, kernels: CausalKernelPair, modes: ModeSpace) -> float:
    # N(x) is diagonal, so [N, A]_ij = (N_i - N_j) A_ij on the nonzeros of A.
    dims = modes.space.shape
    n_diag = smeared_N(x, kernels, modes).diag
    quad = sparse.diags(np.sqrt(np.arange(1, modes.n_max + 1, dtype=float)), 1)
    quad = quad + quad.T
    a = sparse.csr_matrix((n_diag.size, n_diag.size))
    for y, w in kernels.g_window(xp):
        i = modes.factor_of(y)
        left, right = math.prod(dims[:i]), math.prod(dims[i + 1 :])
        a = a + w * sparse.kron(sparse.identity(left), sparse.kron(quad, sparse.identity(right)))
    a = a.tocoo()
    return float(np.max(np.abs((n_diag[a.row] - n_diag[a.col]) * a.data), initial=0.0))


def microcausality_scan(kernels: CausalKernelPair, n_max: int) -> dict[str, float]:
    """Largest ``|[N(x), A(x')]|`` over ordered cell pairs, grouped by where ``x'`` sits relative to ``x``.

    Each pair is evaluated on the Fock space of the union of its two windows.
    """
    lat = kernels.lattice
    worst = {"equal": 0.0, "past": 0.0, "future": 0.0, "spacelike": 0.0}
    cells = list(lat.cells())
    for x in cells:
        for xp in cells:
            modes = ModeSpace(tuple(window_modes(kernels, [x], [xp])), n_max)
            if not modes.cells:
                continue
            rel = causal_relation(lat, x, xp)
            worst[rel] = max(worst[rel], _sparse_commutator_norm(x, xp, kernels, modes))
    return worst
