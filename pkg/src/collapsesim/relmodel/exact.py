"""Exact tier: state vector on a branch register (x) truncated mediating modes.

Only an active window of modes is held in the tensor:

* A mode that has only been displaced (never measured) is in a coherent
  state within each branch, so it is bookkept by its amplitude ``alpha_k(y)``
  and materialized, truncated at ``n_max``, when a hit first needs it
  (``lazy=True``).  With ``lazy=False`` every excitable mode is allocated at
  the start and displaced by truncated unitaries instead.
* Once every cell whose kernels reach a mode has been absorbed and its hits
  applied, and the mode factorizes from the rest of its branch, it is folded
  into the branch amplitude and dropped (``eliminate=True``).  All later
  probabilities are diagonal in the branch register, so this is exact.

Modes that no source ever excites stay in the vacuum and are never stored.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigurationError, DegenerateStateError, OrderingError
from ..hilbert import LinearOperator, apply_local, fock, ladder_matrix, make_space, truncated_coherent, unitary_of
from ..stochastic import SpectralWeights, hit_norm_constant, sample_Z
from .kernels import CausalKernelPair, window_modes
from .lattice import Cell, Hypersurface
from .matter import MatterBranchSet

DEFAULT_DIM_CAP = 4_000_000
RANK_TOL = 1e-12


def excitable_modes(kernels: CausalKernelPair, branches: MatterBranchSet) -> list[Cell]:
    return window_modes(kernels, g_cells=branches.support())


def exact_dimension(kernels: CausalKernelPair, branches: MatterBranchSet, n_max: int, lazy: bool = True) -> int:
    """Dimension bound for the exact tier.

    Eager storage may hold every excitable mode; the lazy window holds at most
    the excitable modes of ``d_f`` consecutive rows (the rows an f-window spans).
    """
    modes = excitable_modes(kernels, branches)
    if not lazy:
        count = len(modes)
    else:
        rows = [y[0] for y in modes]
        d_f = kernels.d_f
        count = max((sum(1 for t in rows if s <= t < s + d_f) for s in set(rows)), default=0)
    return branches.n_branches * (n_max + 1) ** count


class ExactState:
    def __init__(
        self,
        kernels: CausalKernelPair,
        branches: MatterBranchSet,
        n_max: int,
        dim_cap: int = DEFAULT_DIM_CAP,
        lazy: bool = True,
        eliminate: bool = True,
    ):
        if n_max < 1:
            raise ConfigurationError(f"n_max must be >= 1, got {n_max}")
        self.kernels = kernels
        self.lattice = kernels.lattice
        self.branches = branches
        self.n_max = n_max
        self.dim_cap = dim_cap
        self.lazy = lazy
        self.eliminate = eliminate
        self.excitable = excitable_modes(kernels, branches)
        self._touchers = self._build_touchers()
        self.axes: list[Cell] = []
        self.coherent: dict[Cell, np.ndarray] = {}
        self.eliminated: set[Cell] = set()
        self.psi = branches.amplitudes.astype(complex).copy()
        self.surface = Hypersurface(self.lattice)
        self.max_leakage = 0.0
        self._field = None

    def _build_touchers(self) -> dict[Cell, list[Cell]]:
        lat = self.lattice
        out: dict[Cell, list[Cell]] = {y: [] for y in self.excitable}
        for (dt, dj), _ in self.kernels.f_offsets:
            for y in out:
                x = (y[0] + dt, y[1] - dj)
                if lat.contains(x):
                    out[y].append(x)
        for (dt, dj), _ in self.kernels.g_offsets:
            for y in out:
                x = (y[0] - dt, y[1] - dj)
                if lat.contains(x):
                    out[y].append(x)
        return out

    def copy(self) -> ExactState:
        new = object.__new__(ExactState)
        new.__dict__.update(self.__dict__)
        new.psi = self.psi.copy()
        new.axes = list(self.axes)
        new.coherent = {y: a.copy() for y, a in self.coherent.items()}
        new.eliminated = set(self.eliminated)
        new.surface = self.surface.copy()
        return new

    @property
    def n_branches(self) -> int:
        return self.branches.n_branches

    def norm2(self) -> float:
        return float(np.vdot(self.psi, self.psi).real)

    def populations(self) -> np.ndarray:
        w = (np.abs(self.psi.reshape(self.n_branches, -1)) ** 2).sum(axis=1)
        return w / w.sum()

    def _axis(self, y: Cell) -> int | None:
        try:
            return self.axes.index(y) + 1
        except ValueError:
            return None

    def _allocate(self, y: Cell) -> None:
        alpha = self.coherent.pop(y, np.zeros(self.n_branches, dtype=complex))
        size = self.psi.size * (self.n_max + 1)
        if size > self.dim_cap:
            raise ConfigurationError(f"active window dimension {size} exceeds cap {self.dim_cap}")
        amps = np.array([truncated_coherent(a, self.n_max) for a in alpha])
        self.max_leakage = max(self.max_leakage, float(np.max(np.abs(amps[:, -1]) ** 2)))
        shape = (self.n_branches,) + (1,) * (self.psi.ndim - 1) + (self.n_max + 1,)
        self.psi = self.psi[..., None] * amps.reshape(shape)
        self.axes.append(y)

    def _field_operator(self) -> LinearOperator:
        """Single-mode ``a + a^dag``; its eigendecomposition is cached on the operator."""
        if self._field is None:
            low = ladder_matrix(self.n_max, "lower")
            self._field = LinearOperator(make_space([fock(self.n_max)]), matrix=low + low.T)
        return self._field

    def step(self, cell: Cell) -> None:
        """Absorb ``cell``: apply ``exp(-i dV sum_k J_k(x)|k><k| (x) A(x))`` and advance the cut.

        ``A(x)`` is a sum of commuting single-mode terms, so the exponential
        factorizes into one displacement per window mode.
        """
        if not self.surface.is_admissible(cell):
            raise OrderingError(f"cell {cell} is not admissible on cut {self.surface.cut.tolist()}")
        sources = self.branches.sources(cell)
        window = [(y, w) for y, w in self.kernels.g_window(cell) if w != 0]
        if window and np.any(sources != 0):
            dv = self.lattice.cell_volume
            for y, w in window:
                ax = self._axis(y)
                if ax is None and self.lazy:
                    self._displace_coherent(y, -1j * dv * w * sources)
                    continue
                if ax is None:
                    self._allocate(y)
                    ax = self.psi.ndim - 1
                for k, jk in enumerate(sources):
                    if jk != 0:
                        u = unitary_of(self._field_operator(), dv * jk * w).matrix
                        self.psi[k] = apply_local(self.psi[k], u, [ax - 1])
                probs = np.abs(self.psi) ** 2
                self.max_leakage = max(
                    self.max_leakage, float(np.take(probs, self.n_max, axis=ax).sum() / probs.sum())
                )
        self.surface.advance(cell)

    def _displace_coherent(self, y: Cell, beta: np.ndarray) -> None:
        # D(beta)|alpha> = exp(i Im(beta conj(alpha))) |alpha + beta>
        alpha = self.coherent.get(y, np.zeros(self.n_branches, dtype=complex))
        phase = np.exp(1j * np.imag(beta * np.conj(alpha)))
        self.psi *= phase.reshape((-1,) + (1,) * (self.psi.ndim - 1))
        self.coherent[y] = alpha + beta

    def _ensure_window(self, cell: Cell) -> None:
        for y, _ in self.kernels.f_window(cell):
            if y in self.eliminated:
                raise OrderingError(f"mode {y} was released before a hit at {cell} that reads it")
            if self._axis(y) is None and y in self.coherent:
                self._allocate(y)

    def n_tensor(self, cell: Cell) -> np.ndarray:
        """Eigenvalues of ``N(cell)`` over the stored mode axes (register axis excluded)."""
        shape = self.psi.shape[1:]
        out = np.zeros(shape)
        n = np.arange(self.n_max + 1, dtype=float)
        for y, w in self.kernels.f_window(cell):
            ax = self._axis(y)
            if ax is not None:
                view = [1] * len(shape)
                view[ax - 1] = self.n_max + 1
                out = out + w * n.reshape(view)
        return np.broadcast_to(out, shape)

    def spectral_weights(self, cell: Cell) -> SpectralWeights:
        self._ensure_window(cell)
        n = np.broadcast_to(self.n_tensor(cell), self.psi.shape)
        return SpectralWeights(n.reshape(-1), np.abs(self.psi.reshape(-1)) ** 2)

    def sample_z(self, cell: Cell, r: float, rng: np.random.Generator) -> float:
        weights = self.spectral_weights(cell)
        if not weights.total > 0:
            raise DegenerateStateError("zero-norm exact state")
        return sample_Z(weights, r, rng)

    def hit(self, cell: Cell, z: float, r: float) -> tuple[float, float]:
        """Multiply by ``L(Z)`` at ``cell``; returns (norm2 before, norm2 after)."""
        if not self.surface.absorbed(cell):
            raise OrderingError(f"hit at {cell} before the cut has reached it")
        self._ensure_window(cell)
        pre = self.norm2()
        factor = hit_norm_constant(r) * np.exp(-((self.n_tensor(cell) - z) ** 2) / (2 * r * r))
        self.psi = self.psi * factor[None, ...]
        return pre, self.norm2()

    def renormalize(self) -> None:
        n2 = self.norm2()
        if not n2 > 0:
            raise DegenerateStateError("exact state has zero norm")
        self.psi /= math.sqrt(n2)

    def settle(self) -> None:
        """Release stored modes that no remaining cell can touch, when they factorize."""
        if not self.eliminate:
            return
        done = [y for y in self.axes if all(self.surface.absorbed(x) for x in self._touchers[y])]
        if not done:
            return
        if not self._release(done):
            for y in done:
                self._release([y])
        for y in [y for y in self.coherent if all(self.surface.absorbed(x) for x in self._touchers[y])]:
            # never measured: a normalized coherent factor, nothing to fold in
            del self.coherent[y]
            self.eliminated.add(y)

    def _release(self, modes: list[Cell]) -> bool:
        axes = [self._axis(y) for y in modes]
        rest = [a for a in range(1, self.psi.ndim) if a not in axes]
        d_block = (self.n_max + 1) ** len(axes)
        new_parts = []
        for k in range(self.n_branches):
            mat = np.transpose(self.psi[k], [a - 1 for a in axes] + [a - 1 for a in rest]).reshape(d_block, -1)
            u, s, vh = np.linalg.svd(mat, full_matrices=False)
            if s[0] == 0:
                new_parts.append(np.zeros(mat.shape[1], dtype=complex))
                continue
            if s.size > 1 and s[1] > RANK_TOL * s[0]:
                return False
            a = u[:, 0]
            ref = a[0] if abs(a[0]) > 1e-8 else a[np.flatnonzero(np.abs(a) > 1e-8)[0]]
            a = a * (abs(ref) / ref)
            new_parts.append(a.conj() @ mat)
        rest_shape = tuple(self.psi.shape[a] for a in rest)
        self.psi = np.stack([p.reshape(rest_shape) for p in new_parts])
        self.axes = [y for y in self.axes if y not in modes]
        self.eliminated.update(modes)
        return True

    def canonical(self) -> tuple[list[Cell], np.ndarray]:
        """Stored plus bookkept modes in sorted cell order, materialized as one tensor."""
        state = self.copy()
        for y in sorted(state.coherent):
            state._allocate(y)
        cells = sorted(state.axes)
        perm = [0] + [state.axes.index(y) + 1 for y in cells]
        return cells, np.transpose(state.psi, perm)

    def mode_occupations(self) -> dict[Cell, float]:
        """``<n(y)>`` for every mode that is stored or bookkept."""
        probs = np.abs(self.psi) ** 2
        probs = probs / probs.sum()
        pops = probs.reshape(self.n_branches, -1).sum(axis=1)
        n = np.arange(self.n_max + 1)
        out = {}
        for i, y in enumerate(self.axes):
            marg = probs.sum(axis=tuple(a for a in range(probs.ndim) if a != i + 1))
            out[y] = float(marg @ n)
        for y, alpha in self.coherent.items():
            out[y] = float(pops @ np.abs(alpha) ** 2)
        return out
