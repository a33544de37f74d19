"""Spontaneous localization of distinguishable particles on a 1D grid.

Each of M particles carries its own Poisson clock of rate ``lam``.  Between
clicks the state follows the Schrodinger equation (Crank-Nicolson on the
three-point Laplacian, units hbar = m = 1); at a click for particle ``i`` a
centre ``z`` is drawn from ``<psi|L_i(z)^2|psi>/<psi|psi>`` and the state is
multiplied by the Gaussian ``L_i(z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, DegenerateStateError
from .hilbert import HilbertSpace, StateVector, grid, make_space, norm2
from .stochastic import hit_norm_constant, poisson_times


@dataclass(frozen=True)
class GrwConfig:
    n_sites: int = 256
    dx: float = 0.1
    M: int = 1
    hamiltonian: str = "free"  # free | harmonic | none
    omega: float = 1.0
    lam: float = 1.0
    r: float = 0.5
    T: float = 1.0
    dt: float = 0.01
    dim_cap: int = 1 << 22

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError(f"lam must be >= 0, got {self.lam}")
        if self.r <= 0 or self.dt <= 0 or self.dx <= 0 or self.T < 0:
            raise ConfigurationError("r, dt and dx must be > 0 and T >= 0")
        if self.M < 1:
            raise ConfigurationError(f"M must be >= 1, got {self.M}")
        if self.hamiltonian not in ("free", "harmonic", "none"):
            raise ConfigurationError(f"unknown hamiltonian {self.hamiltonian!r}")
        if self.n_sites ** self.M > self.dim_cap:
            raise ConfigurationError(
                f"n_sites^M = {self.n_sites ** self.M} exceeds dim_cap {self.dim_cap}"
            )

    @property
    def coords(self) -> np.ndarray:
        return (np.arange(self.n_sites) - (self.n_sites - 1) / 2.0) * self.dx

    @property
    def space(self) -> HilbertSpace:
        return make_space([grid(self.n_sites)] * self.M)


@dataclass
class GridHamiltonian:
    """Single-particle tridiagonal Hamiltonian with hard walls."""

    coords: np.ndarray
    dx: float
    kind: str = "free"
    omega: float = 1.0

    @classmethod
    def from_config(cls, config: GrwConfig) -> GridHamiltonian:
        return cls(config.coords, config.dx, config.hamiltonian, config.omega)

    @property
    def diagonal(self) -> np.ndarray:
        d = np.full(self.coords.size, 1.0 / self.dx**2)
        if self.kind == "harmonic":
            d = d + 0.5 * self.omega**2 * self.coords**2
        return d

    @property
    def offdiagonal(self) -> float:
        return -0.5 / self.dx**2

    def dense(self) -> np.ndarray:
        n = self.coords.size
        return (
            np.diag(self.diagonal)
            + np.diag(np.full(n - 1, self.offdiagonal), 1)
            + np.diag(np.full(n - 1, self.offdiagonal), -1)
        )


def schrodinger_step(state: StateVector, hamiltonian: GridHamiltonian | None, dt: float) -> StateVector:
    """One Crank-Nicolson (Cayley) step ``(1 + iH dt/2)^-1 (1 - iH dt/2)`` per particle."""
    if hamiltonian is None or hamiltonian.kind == "none" or dt == 0:
        return state
    psi = state.tensor()
    d = hamiltonian.diagonal
    off = hamiltonian.offdiagonal
    n = d.size
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = 0.5j * dt * off
    ab[1] = 1 + 0.5j * dt * d
    ab[2, :-1] = 0.5j * dt * off
    for axis in range(psi.ndim):
        moved = np.moveaxis(psi, axis, 0)
        flat = moved.reshape(n, -1)
        rhs = (1 - 0.5j * dt * d)[:, None] * flat
        rhs[1:] -= 0.5j * dt * off * flat[:-1]
        rhs[:-1] -= 0.5j * dt * off * flat[1:]
        out = solve_banded((1, 1), ab, rhs, check_finite=False)
        psi = np.moveaxis(out.reshape(moved.shape), 0, axis)
    return StateVector(state.space, psi.reshape(-1))


def evolve(state: StateVector, hamiltonian: GridHamiltonian | None, duration: float, dt: float) -> StateVector:
    """Advance by ``duration`` using steps of ``dt`` and one shorter final step."""
    if hamiltonian is None or hamiltonian.kind == "none" or duration <= 0:
        return state
    n_full = int(math.floor(duration / dt + 1e-12))
    for _ in range(n_full):
        state = schrodinger_step(state, hamiltonian, dt)
    rest = duration - n_full * dt
    if rest > 1e-14:
        state = schrodinger_step(state, hamiltonian, rest)
    return state


def localization_profile(coords: np.ndarray, z: float, r: float) -> np.ndarray:
    return hit_norm_constant(r) * np.exp(-((coords - z) ** 2) / (2 * r * r))


def apply_localization(state: StateVector, i: int, z: float, r: float, coords: np.ndarray) -> StateVector:
    """Multiply by the Gaussian localization operator of particle ``i`` (unnormalized result)."""
    shape = [1] * len(state.space.factors)
    shape[i] = coords.size
    psi = state.tensor() * localization_profile(coords, z, r).reshape(shape)
    return StateVector(state.space, psi.reshape(-1))


def position_marginal(state: StateVector, i: int) -> np.ndarray:
    probs = state.probabilities().reshape(state.space.shape)
    other = tuple(a for a in range(probs.ndim) if a != i)
    return probs.sum(axis=other)


def localization_center_density(state: StateVector, i: int, r: float, coords: np.ndarray, z) -> np.ndarray:
    """``<psi|L_i(z)^2|psi>/<psi|psi>`` evaluated at the points ``z``."""
    p = position_marginal(state, i)
    p = p / p.sum()
    z = np.asarray(z, dtype=float)
    c2 = hit_norm_constant(r) ** 2
    return c2 * np.exp(-((coords[None, :] - z.reshape(-1, 1)) ** 2) / (r * r)) @ p


def sample_center(state: StateVector, i: int, r: float, coords: np.ndarray, rng: np.random.Generator) -> float:
    p = position_marginal(state, i)
    total = p.sum()
    if not total > 0:
        raise DegenerateStateError("cannot sample a hit centre for a zero-norm state")
    site = min(int(np.searchsorted(np.cumsum(p), rng.random() * total, side="right")), p.size - 1)
    return float(coords[site] + rng.normal(0.0, r / math.sqrt(2.0)))


@dataclass
class GrwHit:
    time: float
    particle: int
    z: float
    pre: float
    post: float


@dataclass
class GrwTrajectory:
    hits: list[GrwHit] = field(default_factory=list)
    snapshots: dict[float, StateVector] = field(default_factory=dict)
    final_state: StateVector | None = None


def gaussian_packet(coords: np.ndarray, center: float, sigma: float, k0: float = 0.0) -> np.ndarray:
    """Normalized single-particle packet whose position variance is ``sigma**2``."""
    psi = np.exp(-((coords - center) ** 2) / (4 * sigma**2) + 1j * k0 * coords)
    return psi / np.linalg.norm(psi)


def two_packet_state(config: GrwConfig, separation: float, weight_right: float, sigma: float) -> StateVector:
    """Single particle in ``sqrt(1-w)|left> + sqrt(w)|right>`` with packets at ``+-separation/2``."""
    x = config.coords
    left = gaussian_packet(x, -separation / 2, sigma)
    right = gaussian_packet(x, separation / 2, sigma)
    psi = math.sqrt(1 - weight_right) * left + math.sqrt(weight_right) * right
    psi = psi / np.linalg.norm(psi)
    if config.M != 1:
        raise ConfigurationError("two_packet_state builds a single-particle state")
    return StateVector(config.space, psi)


def run_grw(
    config: GrwConfig,
    state: StateVector,
    rng: np.random.Generator,
    snapshot_times=(),
) -> GrwTrajectory:
    """Simulate one trajectory from ``state`` over ``[0, config.T]``.

    The state is renormalized after every hit; each :class:`GrwHit` keeps the
    squared norms before and after the localization operator.
    """
    ham = GridHamiltonian.from_config(config)
    coords = config.coords
    events = []
    for i in range(config.M):
        for t in poisson_times(config.lam, config.T, rng) if config.T > 0 else ():
            events.append((float(t), 0, i))
    events.sort()
    for t in snapshot_times:
        events.append((float(t), 1, -1))
    events.sort(key=lambda e: (e[0], e[1]))

    traj = GrwTrajectory()
    now = 0.0
    for t, kind, i in events:
        state = evolve(state, ham, t - now, config.dt)
        now = t
        if kind == 1:
            traj.snapshots[t] = state
            continue
        z = sample_center(state, i, config.r, coords, rng)
        pre = norm2(state)
        state = apply_localization(state, i, z, config.r, coords)
        post = norm2(state)
        if not post > 0:
            raise DegenerateStateError("localization annihilated the state")
        traj.hits.append(GrwHit(t, i, z, pre, post))
        state = StateVector(state.space, state.amplitudes / math.sqrt(post))
    state = evolve(state, ham, config.T - now, config.dt)
    traj.final_state = state
    return traj
