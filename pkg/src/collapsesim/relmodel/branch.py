"""Branch-coherent tier.

Each branch k keeps a scalar weight ``w_k`` and the coherent amplitude
``alpha_k(y)`` of every mediating mode.  Because the interaction is linear in
``a`` and ``a^dag``, absorbing a cell displaces the coherent amplitudes in its
future window exactly.  Hits only reweight branches; inter-branch phases and
the within-branch back-action of hits are dropped, which is accurate once the
branches' field images are nearly orthogonal.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.stats import poisson

from ..errors import ConfigurationError, DegenerateStateError, OrderingError
from .kernels import CausalKernelPair
from .lattice import Cell, Hypersurface
from .matter import MatterBranchSet

ENUM_TAIL = 1e-13


def branch_tracks(kernels: CausalKernelPair, branches: MatterBranchSet) -> np.ndarray:
    """Coherent amplitudes ``alpha_k(y)`` after every cell has been absorbed.

    Equal to the result of applying the branch-tier step at every cell, in
    any admissible order, since displacements add.
    """
    lat = kernels.lattice
    dv = lat.cell_volume
    alpha = np.zeros((branches.n_branches, lat.n_t, lat.n_x), dtype=complex)
    src = branches.profiles
    for (dt, dj), w in kernels.g_offsets:
        if dt >= lat.n_t or abs(dj) >= lat.n_x:
            continue
        j_lo, j_hi = max(0, -dj), min(lat.n_x, lat.n_x - dj)
        alpha[:, dt:, j_lo + dj : j_hi + dj] += -1j * dv * w * src[:, : lat.n_t - dt, j_lo:j_hi]
    return alpha


def track_moments(kernels: CausalKernelPair, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of ``N(x)`` for every branch and cell under product coherent states."""
    lat = kernels.lattice
    occ = np.abs(alpha) ** 2
    m = np.zeros(occ.shape)
    v = np.zeros(occ.shape)
    for (dt, dj), w in kernels.f_offsets:
        if dt >= lat.n_t or abs(dj) >= lat.n_x:
            continue
        j_lo, j_hi = max(0, -dj), min(lat.n_x, lat.n_x - dj)
        part = occ[:, : lat.n_t - dt, j_lo + dj : j_hi + dj]
        m[:, dt:, j_lo:j_hi] += w * part
        v[:, dt:, j_lo:j_hi] += w * w * part
    return m, v


@lru_cache(maxsize=65536)
def _poisson_table(mean: float) -> tuple[np.ndarray, np.ndarray]:
    if mean == 0:
        return np.zeros(1), np.ones(1)
    hi = int(poisson.isf(ENUM_TAIL, mean)) + 1
    n = np.arange(hi + 1)
    p = poisson.pmf(n, mean)
    return n.astype(float), p / p.sum()


def occupation_distribution(occupations, f_weights, decimals: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Distribution of ``sum_y f_y n_y`` with independent ``n_y ~ Poisson(occupations[y])``.

    Each Poisson factor is cut where its upper tail drops below ``ENUM_TAIL``
    and renormalized, then the factors are convolved exactly.
    """
    dist = {0.0: 1.0}
    for occ, f in zip(occupations, f_weights):
        if occ == 0 or f == 0:
            continue
        n, p = _poisson_table(float(occ))
        new: dict[float, float] = {}
        for val, prob in dist.items():
            for nv, pn in zip(n, p):
                key = round(val + f * nv, decimals)
                new[key] = new.get(key, 0.0) + prob * pn
        dist = new
    keys = np.array(sorted(dist))
    return keys, np.array([dist[k] for k in keys])


def _normal_pdf(z, mean, var):
    return np.exp(-0.5 * (z - mean) ** 2 / var) / np.sqrt(2 * math.pi * var)


class BranchState:
    def __init__(self, kernels: CausalKernelPair, branches: MatterBranchSet, mode: str = "clt"):
        if mode not in ("clt", "enumerate"):
            raise ConfigurationError(f"unknown branch-tier mode {mode!r}")
        self.kernels = kernels
        self.lattice = kernels.lattice
        self.branches = branches
        self.mode = mode
        self.weights = branches.weights.astype(float)
        self.alpha = np.zeros((branches.n_branches, self.lattice.n_t, self.lattice.n_x), dtype=complex)
        self.surface = Hypersurface(self.lattice)

    @classmethod
    def from_tracks(cls, kernels, branches, alpha, mode="clt") -> BranchState:
        """State whose field images are already complete; the cut is marked as fully advanced."""
        state = cls(kernels, branches, mode)
        state.alpha = alpha
        state.surface.cut[:] = kernels.lattice.n_t
        return state

    def copy(self) -> BranchState:
        new = object.__new__(BranchState)
        new.__dict__.update(self.__dict__)
        new.weights = self.weights.copy()
        new.alpha = self.alpha.copy()
        new.surface = self.surface.copy()
        return new

    def populations(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def step(self, cell: Cell) -> None:
        if not self.surface.is_admissible(cell):
            raise OrderingError(f"cell {cell} is not admissible on cut {self.surface.cut.tolist()}")
        sources = self.branches.sources(cell)
        if np.any(sources != 0):
            dv = self.lattice.cell_volume
            for (t, j), w in self.kernels.g_window(cell):
                self.alpha[:, t, j] += -1j * sources * w * dv
        self.surface.advance(cell)

    def window_occupations(self, cell: Cell) -> tuple[np.ndarray, np.ndarray]:
        """(|alpha_k(y)|^2 over the f-window, f weights)."""
        window = self.kernels.f_window(cell)
        if not window:
            return np.zeros((self.branches.n_branches, 0)), np.zeros(0)
        ts = [y[0] for y, _ in window]
        js = [y[1] for y, _ in window]
        occ = np.abs(self.alpha[:, ts, js]) ** 2
        return occ, np.array([w for _, w in window])

    def moments(self, cell: Cell) -> tuple[np.ndarray, np.ndarray]:
        occ, f = self.window_occupations(cell)
        return occ @ f, occ @ (f * f)

    def n_distribution(self, k: int, cell: Cell) -> tuple[np.ndarray, np.ndarray]:
        occ, f = self.window_occupations(cell)
        return occupation_distribution(occ[k], f)

    def hit_densities(self, cell: Cell, z: float, r: float) -> np.ndarray:
        """``<L(Z)^2>_k`` for every branch."""
        if self.mode == "clt":
            m, v = self.moments(cell)
            return _normal_pdf(z, m, v + 0.5 * r * r)
        out = np.empty(self.branches.n_branches)
        for k in range(out.size):
            vals, probs = self.n_distribution(k, cell)
            out[k] = probs @ _normal_pdf(z, vals, 0.5 * r * r)
        return out

    def sample_z(self, cell: Cell, r: float, rng: np.random.Generator) -> float:
        total = self.weights.sum()
        if not total > 0:
            raise DegenerateStateError("all branch weights vanished")
        cum = np.cumsum(self.weights)
        k = min(int(np.searchsorted(cum, rng.random() * total, side="right")), cum.size - 1)
        if self.mode == "clt":
            m, v = self.moments(cell)
            return float(rng.normal(m[k], math.sqrt(v[k] + 0.5 * r * r)))
        vals, probs = self.n_distribution(k, cell)
        n = vals[min(int(np.searchsorted(np.cumsum(probs), rng.random(), side="right")), vals.size - 1)]
        return float(n + rng.normal(0.0, r / math.sqrt(2.0)))

    def hit(self, cell: Cell, z: float, r: float) -> tuple[float, float]:
        if not self.surface.absorbed(cell):
            raise OrderingError(f"hit at {cell} before the cut has reached it")
        pre = float(self.weights.sum())
        self.weights = self.weights * self.hit_densities(cell, z, r)
        return pre, float(self.weights.sum())

    def renormalize(self) -> None:
        total = self.weights.sum()
        if not total > 0:
            raise DegenerateStateError("all branch weights vanished")
        self.weights = self.weights / total

    def overlap(self, j: int, k: int) -> float:
        """``|<coh_j|coh_k>| = exp(-1/2 sum_y |alpha_j(y) - alpha_k(y)|^2)``."""
        return math.exp(-0.5 * float(np.sum(np.abs(self.alpha[j] - self.alpha[k]) ** 2)))
