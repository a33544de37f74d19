"""Number-density localization of a bosonic lattice field.

Sites ``0..n_sites-1`` on a ring, each a truncated Fock mode.  Hits are
Poisson distributed in the (t, x) slab; a hit at site ``x`` multiplies the
state by a Gaussian in the smeared number operator ``N(x) = sum_y g(x-y) n(y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateStateError
from .hilbert import (
    HilbertSpace,
    LinearOperator,
    StateVector,
    fock,
    ladder_matrix,
    make_space,
    norm2,
    unitary_of,
)
from .records import HitEvent, TrajectoryRecord
from .stochastic import Region, SpectralWeights, hit_norm_constant, sample_Z, sprinkle

LEAKAGE_TOL = 1e-6


@dataclass(frozen=True)
class SmearKernel:
    """Symmetric, non-negative site kernel normalized to unit sum."""

    weights: tuple[tuple[int, float], ...]

    @classmethod
    def from_weights(cls, weights: dict[int, float]) -> SmearKernel:
        if any(w < 0 for w in weights.values()):
            raise ConfigurationError("kernel weights must be non-negative")
        for off, w in weights.items():
            if not math.isclose(weights.get(-off, 0.0), w, rel_tol=1e-12, abs_tol=1e-15):
                raise ConfigurationError(f"kernel is not symmetric at offset {off}")
        total = sum(weights.values())
        if not total > 0:
            raise ConfigurationError("kernel has no weight")
        peak = weights.get(0, 0.0)
        if any(w > peak for w in weights.values()):
            raise ConfigurationError("kernel must peak at zero offset")
        return cls(tuple(sorted((int(k), float(v) / total) for k, v in weights.items())))

    @classmethod
    def delta(cls) -> SmearKernel:
        return cls(((0, 1.0),))

    @classmethod
    def gaussian(cls, width: float, radius: int) -> SmearKernel:
        return cls.from_weights({k: math.exp(-0.5 * (k / width) ** 2) for k in range(-radius, radius + 1)})

    def as_dict(self) -> dict[int, float]:
        return dict(self.weights)


@dataclass(frozen=True)
class FieldLocConfig:
    n_sites: int = 6
    n_max: int = 3
    kernel: SmearKernel = field(default_factory=SmearKernel.delta)
    r: float = 1.0
    mu: float = 1.0
    hamiltonian: str = "none"  # none | hopping
    J_hop: float = 0.0
    T: float = 1.0
    dt: float = 0.1

    def __post_init__(self):
        if self.r <= 0:
            raise ConfigurationError(f"r must be > 0, got {self.r}")
        if self.mu < 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if self.n_sites < 2 or self.n_max < 1:
            raise ConfigurationError("need n_sites >= 2 and n_max >= 1")
        if self.hamiltonian not in ("none", "hopping"):
            raise ConfigurationError(f"unknown hamiltonian {self.hamiltonian!r}")

    @property
    def space(self) -> HilbertSpace:
        return make_space([fock(self.n_max)] * self.n_sites)


def smeared_number_op(x: int, kernel: SmearKernel, space: HilbertSpace) -> LinearOperator:
    """Diagonal ``N(x) = sum_y g(x - y) n(y)`` with periodic wrap."""
    n_sites = len(space.factors)
    diag = np.zeros(space.dim)
    for off, w in kernel.weights:
        diag += w * space.occupation((x + off) % n_sites)
    return LinearOperator(space, diag=diag)


def total_number_op(space: HilbertSpace) -> LinearOperator:
    return LinearOperator(space, diag=sum(space.occupation(i) for i in range(len(space.factors))))


def apply_field_hit(state: StateVector, x: int, z: float, r: float, kernel: SmearKernel) -> StateVector:
    n_op = smeared_number_op(x, kernel, state.space).diag
    factor = hit_norm_constant(r) * np.exp(-((n_op - z) ** 2) / (2 * r * r))
    return StateVector(state.space, factor * state.amplitudes)


def spectral_weights(state: StateVector, x: int, kernel: SmearKernel) -> SpectralWeights:
    return SpectralWeights(smeared_number_op(x, kernel, state.space).diag, state.probabilities())


def hopping_hamiltonian(space: HilbertSpace, J_hop: float) -> LinearOperator:
    """Nearest-neighbour hopping ``-J sum_i (a_i^dag a_{i+1} + h.c.)`` on a ring."""
    n_sites = len(space.factors)
    n_max = space.factors[0].size
    lower = ladder_matrix(n_max, "lower")
    eye = np.eye(n_max + 1)

    def site_op(i, local):
        out = np.ones((1, 1), dtype=complex)
        for s in range(n_sites):
            out = np.kron(out, local if s == i else eye)
        return out

    lows = [site_op(i, lower) for i in range(n_sites)]
    h = np.zeros((space.dim, space.dim), dtype=complex)
    bonds = {tuple(sorted((i, (i + 1) % n_sites))) for i in range(n_sites)}
    for i, j in sorted(bonds):
        hop = lows[i].conj().T @ lows[j]
        h -= J_hop * (hop + hop.conj().T)
    return LinearOperator(space, matrix=h)


def site_of(x: float, n_sites: int) -> int:
    """Nearest site to coordinate ``x``; exact ties go to the lower index."""
    return int(math.ceil(x - 0.5)) % n_sites


def cluster_state(space: HilbertSpace, amplitudes: dict[int, complex], k: int) -> StateVector:
    """Superposition of ``k`` bosons sitting together at each listed site."""
    amps = np.zeros(space.dim, dtype=complex)
    n_sites = len(space.factors)
    for site, c in amplitudes.items():
        occ = [0] * n_sites
        occ[site] = k
        amps[space.flat_index(occ)] += c
    return StateVector(space, amps)


def _leakage(state: StateVector) -> float:
    """Top-level probability, counted only where number-conserving dynamics could be truncated."""
    space = state.space
    n_max = space.factors[0].size
    probs = state.probabilities()
    support = probs > 0
    totals = total_number_op(space).diag
    if not support.any() or totals[support].max() <= n_max:
        return 0.0
    top = np.zeros(space.dim, dtype=bool)
    for i in range(len(space.factors)):
        top |= space.occupation(i) == n_max
    return float(probs[top].sum() / probs.sum())


def run_fieldloc(
    config: FieldLocConfig,
    state: StateVector,
    rng: np.random.Generator,
    branch_masks: list[np.ndarray] | None = None,
) -> TrajectoryRecord:
    """One trajectory over ``[0, T]``.

    ``branch_masks`` (boolean arrays over the basis) select the populations
    recorded after every hit; without them the record tracks the total weight.
    """
    space = config.space
    if state.space != space:
        raise ConfigurationError("initial state does not match the configured lattice")
    masks = branch_masks or [np.ones(space.dim, dtype=bool)]

    def populations(s):
        p = s.probabilities()
        w = np.array([p[m].sum() for m in masks])
        return w / p.sum()

    region = Region(0.0, config.T, -0.5, config.n_sites - 0.5)
    points = sprinkle(region, config.mu, rng).points if config.T > 0 else np.empty((0, 2))

    ham = None
    if config.hamiltonian == "hopping" and config.J_hop != 0:
        ham = hopping_hamiltonian(space, config.J_hop)
    record = TrajectoryRecord(initial_weights=populations(state))
    worst_leak = _leakage(state)

    def advance(s, duration):
        nonlocal worst_leak
        if ham is None or duration <= 0:
            return s
        n_full = int(math.floor(duration / config.dt + 1e-12))
        steps = [config.dt] * n_full
        if duration - n_full * config.dt > 1e-14:
            steps.append(duration - n_full * config.dt)
        for h in steps:
            s = StateVector(space, unitary_of(ham, h).matrix @ s.amplitudes)
            worst_leak = max(worst_leak, _leakage(s))
        return s

    now = 0.0
    for t, xc in points:
        state = advance(state, t - now)
        now = t
        site = site_of(xc, config.n_sites)
        z = sample_Z(spectral_weights(state, site, config.kernel), config.r, rng)
        pre = norm2(state)
        state = apply_field_hit(state, site, z, config.r, config.kernel)
        post = norm2(state)
        if not post > 0:
            raise DegenerateStateError("hit annihilated the state")
        state = StateVector(space, state.amplitudes / math.sqrt(post))
        record.hits.append(HitEvent(float(t), site, z, config.r, pre, post, populations(state)))
    state = advance(state, config.T - now)
    record.final_state = state
    record.flags["max_leakage"] = worst_leak
    record.flags["invalid"] = worst_leak > LEAKAGE_TOL
    return record
