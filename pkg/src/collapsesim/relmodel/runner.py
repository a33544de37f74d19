"""Trajectory runner for the relativistic model and its derived quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, UsageError
from ..records import HitEvent, TrajectoryRecord
from ..stochastic import Region, sprinkle
from .branch import BranchState, branch_tracks, occupation_distribution, track_moments
from .exact import DEFAULT_DIM_CAP, ExactState
from .kernels import CausalKernelPair
from .lattice import Cell, Hypersurface, SpacetimeLattice, time_major_order
from .matter import MatterBranchSet

LEAKAGE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RelConfig:
    kernels: CausalKernelPair
    branches: MatterBranchSet
    mu: float
    r: float
    tier: str = "branch"  # branch | exact
    mode: str = "clt"  # clt | enumerate (branch tier only)
    n_max: int = 4
    dim_cap: int = DEFAULT_DIM_CAP
    hit_columns: tuple[tuple[int, int], ...] | None = None  # half-open column ranges
    threshold: float = 0.99
    lazy: bool = True  # exact tier: materialize modes only when a hit reads them
    eliminate: bool = True  # exact tier: release modes no remaining cell can touch

    def __post_init__(self):
        if self.mu < 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if self.r <= 0:
            raise ConfigurationError(f"r must be > 0, got {self.r}")
        if self.tier not in ("branch", "exact"):
            raise ConfigurationError(f"unknown tier {self.tier!r}")
        if self.mode not in ("clt", "enumerate"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.branches.profiles.shape[1:] != (self.lattice.n_t, self.lattice.n_x):
            raise ConfigurationError("branch profiles do not match the lattice")

    @property
    def lattice(self) -> SpacetimeLattice:
        return self.kernels.lattice


@dataclass(frozen=True)
class Hit:
    time: float
    cell: Cell


def sprinkle_hits(config: RelConfig, rng: np.random.Generator) -> list[Hit]:
    """Poisson hits over the lattice (or the configured column ranges), sorted by time."""
    lat = config.lattice
    ranges = config.hit_columns or ((0, lat.n_x),)
    hits = []
    for c0, c1 in ranges:
        region = Region(0.0, lat.n_t * lat.a_t, c0 * lat.a_x, c1 * lat.a_x)
        for t, x in sprinkle(region, config.mu, rng).points:
            hits.append(Hit(float(t), lat.cell_of(t, x)))
    hits.sort(key=lambda h: h.time)
    return hits


def check_order(lattice: SpacetimeLattice, order: Sequence[Cell]) -> None:
    surface = Hypersurface(lattice)
    for cell in order:
        surface.advance(cell)
    if not surface.complete:
        raise UsageError("sweep order does not cover the lattice")


class RelativisticModel:
    """Prepared model; tracks for the branch tier are computed once and shared by trajectories."""

    def __init__(self, config: RelConfig):
        self.config = config
        self._tracks = None
        self._moments = None

    @property
    def tracks(self) -> np.ndarray:
        if self._tracks is None:
            self._tracks = branch_tracks(self.config.kernels, self.config.branches)
        return self._tracks

    @property
    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        if self._moments is None:
            self._moments = track_moments(self.config.kernels, self.tracks)
        return self._moments

    def log_densities(self, cell: Cell, z: float) -> np.ndarray:
        """Per-branch ``log <L(Z)^2>_k`` at ``cell`` for complete field images (causal kernels)."""
        cfg = self.config
        t, j = cell
        if cfg.mode == "clt":
            m, v = self.moments
            var = v[:, t, j] + 0.5 * cfg.r * cfg.r
            return -0.5 * (z - m[:, t, j]) ** 2 / var - 0.5 * np.log(2 * math.pi * var)
        state = BranchState.from_tracks(cfg.kernels, cfg.branches, self.tracks, cfg.mode)
        return np.log(np.maximum(state.hit_densities(cell, z, cfg.r), 1e-300))

    def initial_state(self):
        cfg = self.config
        if cfg.tier == "exact":
            return ExactState(cfg.kernels, cfg.branches, cfg.n_max, cfg.dim_cap, cfg.lazy, cfg.eliminate)
        return BranchState(cfg.kernels, cfg.branches, cfg.mode)

    def run(
        self,
        rng: np.random.Generator,
        hits: Sequence[Hit] | None = None,
        order: Sequence[Cell] | None = None,
        z_values: dict | None = None,
        stop_weight: float | None = None,
    ) -> TrajectoryRecord:
        """Sweep the cut over the lattice, applying hits in the cells that contain them.

        ``z_values`` maps ``(cell, i)`` (the i-th hit in that cell, in time
        order) to a fixed Z, replacing sampling.  ``stop_weight`` ends the
        trajectory early once one branch population reaches it.
        """
        cfg = self.config
        if hits is None:
            hits = sprinkle_hits(cfg, rng)
        by_cell: dict[Cell, list[Hit]] = {}
        for h in hits:
            by_cell.setdefault(h.cell, []).append(h)
        if cfg.tier == "branch" and cfg.kernels.causal and order is None:
            return self._run_branch_fast(rng, by_cell, z_values, stop_weight)
        if order is None:
            order = time_major_order(cfg.lattice)
        state = self.initial_state()
        record = TrajectoryRecord(initial_weights=state.populations())
        for cell in order:
            state.step(cell)
            for i, h in enumerate(by_cell.get(cell, ())):
                z = z_values[(cell, i)] if z_values is not None else state.sample_z(cell, cfg.r, rng)
                pre, post = state.hit(cell, z, cfg.r)
                state.renormalize()
                record.hits.append(HitEvent(cfg.lattice.time_of(cell), cell, z, cfg.r, pre, post, state.populations()))
            if cfg.tier == "exact":
                state.settle()
        record.final_state = state
        if cfg.tier == "exact":
            record.flags["max_leakage"] = state.max_leakage
            record.flags["invalid"] = state.max_leakage > LEAKAGE_TOL
        return record

    def _run_branch_fast(self, rng, by_cell, z_values, stop_weight) -> TrajectoryRecord:
        # With causal kernels every contribution to alpha in the f-window of x
        # comes from cells in x's past, so complete tracks equal in-sweep values.
        cfg = self.config
        lat = cfg.lattice
        state = BranchState.from_tracks(cfg.kernels, cfg.branches, self.tracks, cfg.mode)
        record = TrajectoryRecord(initial_weights=state.populations())
        m_all, v_all = self.moments
        half_r2 = 0.5 * cfg.r * cfg.r
        w = state.weights.copy()
        for cell in sorted(by_cell):
            t, j = cell
            m, v = m_all[:, t, j], v_all[:, t, j]
            for i, h in enumerate(by_cell[cell]):
                if z_values is not None:
                    z = z_values[(cell, i)]
                elif cfg.mode == "clt":
                    k = _pick(w, rng)
                    z = float(rng.normal(m[k], math.sqrt(v[k] + half_r2)))
                else:
                    state.weights = w
                    z = state.sample_z(cell, cfg.r, rng)
                if cfg.mode == "clt":
                    var = v + half_r2
                    logd = -0.5 * (z - m) ** 2 / var - 0.5 * np.log(2 * math.pi * var)
                else:
                    logd = np.log(np.maximum(state.hit_densities(cell, z, cfg.r), 1e-300))
                pre = float(w.sum())
                top = logd.max()
                w = w * np.exp(logd - top)
                scale = float(w.sum())
                post = scale * math.exp(top)
                w = w / scale
                record.hits.append(HitEvent(lat.time_of(cell), cell, z, cfg.r, pre, post, w))
                if stop_weight is not None and w.max() >= stop_weight:
                    state.weights = w
                    record.final_state = state
                    record.flags["stopped_early"] = True
                    return record
        state.weights = w
        record.final_state = state
        return record


def _pick(w: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random() * w.sum()
    acc = 0.0
    for k, wk in enumerate(w):
        acc += wk
        if u < acc:
            return k
    return w.size - 1


def run_relativistic(config: RelConfig, rng: np.random.Generator, **kwargs) -> TrajectoryRecord:
    return RelativisticModel(config).run(rng, **kwargs)


def tomonaga_step(state, cell: Cell):
    state.step(cell)
    return state


def apply_rel_hit(state, cell: Cell, z: float, r: float):
    state.hit(cell, z, r)
    return state


def sample_rel_Z(state, cell: Cell, r: float, rng: np.random.Generator) -> float:
    return state.sample_z(cell, r, rng)


def joint_probability(record: TrajectoryRecord) -> float:
    """Joint density of all realized Z values: the product of per-hit norm ratios."""
    out = 1.0
    for h in record.hits:
        if h.pre is None or h.post is None:
            raise UsageError("record lacks pre/post norms")
        out *= h.post / h.pre
    return out


def reduction_time(record: TrajectoryRecord, threshold: float = 0.99) -> float | None:
    """First cut time at which one branch holds at least ``threshold`` of the weight."""
    if np.max(record.initial_weights) >= threshold:
        return 0.0
    for h in record.hits:
        if h.weights is not None and np.max(h.weights) >= threshold:
            return h.time
    return None


def steady_moments(config: RelConfig) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-row moments for a time-static source, computed on a short lattice.

    Returns ``(m, v, n_rows)`` where rows ``>= n_rows - 1`` all equal the last row.
    """
    if not config.branches.is_static:
        raise ConfigurationError("steady moments need time-static matter profiles")
    kern = config.kernels
    n_rows = kern.d_f + kern.d_g + 1
    small = replace(kern.lattice, n_t=n_rows)
    kern_small = CausalKernelPair(small, kern.f_offsets, kern.g_offsets, kern.causal)
    prof = config.branches.profiles[:, :1, :]
    br = MatterBranchSet(config.branches.amplitudes, np.broadcast_to(prof, (prof.shape[0], n_rows, small.n_x)))
    m, v = track_moments(kern_small, branch_tracks(kern_small, br))
    return m, v, n_rows


def static_reduction_time(
    config: RelConfig,
    rng: np.random.Generator,
    max_time: float,
    threshold: float | None = None,
    chunk: int = 8192,
    moments=None,
) -> float | None:
    """Branch-tier reduction time for time-static sources on an unbounded strip.

    Uses the fact that per-hit branch selection with current weights gives
    the same joint law of Z values as drawing one branch from the initial
    weights and sampling every Z from that branch.  Only columns where some
    branch has a nonzero field image can move the weights, so only hits
    there are generated.
    """
    cfg = config
    if not cfg.kernels.causal:
        raise ConfigurationError("static sampler needs causal kernels")
    threshold = cfg.threshold if threshold is None else threshold
    lat = cfg.lattice
    m, v, n_rows = moments if moments is not None else steady_moments(cfg)
    w0 = cfg.branches.weights
    if w0.max() >= threshold:
        return 0.0
    active = np.flatnonzero(np.any((m > 0) | (v > 0), axis=(0, 1)))
    if cfg.hit_columns is not None:
        allowed = np.zeros(lat.n_x, dtype=bool)
        for c0, c1 in cfg.hit_columns:
            allowed[c0:c1] = True
        active = active[allowed[active]]
    if active.size == 0 or cfg.mu == 0:
        return None
    rate = cfg.mu * lat.a_x * active.size
    k_true = _pick(w0, rng)
    half_r2 = 0.5 * cfg.r * cfg.r
    logw = np.log(np.maximum(w0, 1e-300))
    log_thr = math.log(threshold)
    enum_cache: dict = {}
    now = 0.0
    while now < max_time:
        times = now + np.cumsum(rng.exponential(1.0 / rate, size=chunk))
        cols = active[rng.integers(active.size, size=chunk)]
        rows = np.minimum((times / lat.a_t).astype(np.int64), n_rows - 1)
        mk, vk = m[:, rows, cols], v[:, rows, cols]
        if cfg.mode == "clt":
            z = rng.normal(mk[k_true], np.sqrt(vk[k_true] + half_r2))
            var = vk + half_r2
            logd = -0.5 * (z[None, :] - mk) ** 2 / var - 0.5 * np.log(2 * math.pi * var)
        else:
            z, logd = _enumerate_chunk(cfg, rows, cols, k_true, rng, enum_cache, n_rows)
        cum = logw[:, None] + np.cumsum(logd, axis=1)
        top = cum.max(axis=0)
        log_pmax = -np.log(np.exp(cum - top[None, :]).sum(axis=0))
        hit = np.flatnonzero((log_pmax >= log_thr) & (times < max_time))
        if hit.size:
            i = hit[0]
            return float(math.floor(times[i] / lat.a_t) * lat.a_t)
        logw = cum[:, -1] - top[-1]
        now = times[-1]
    return None


def _enumerate_chunk(cfg, rows, cols, k_true, rng, cache, n_rows):
    """Enumerate-mode draws and log densities for a chunk of hits (static sources)."""
    lat_small = replace(cfg.lattice, n_t=n_rows)
    kern = CausalKernelPair(lat_small, cfg.kernels.f_offsets, cfg.kernels.g_offsets)
    prof = cfg.branches.profiles[:, :1, :]
    br = MatterBranchSet(cfg.branches.amplitudes, np.broadcast_to(prof, (prof.shape[0], n_rows, lat_small.n_x)))
    if "state" not in cache:
        cache["state"] = BranchState.from_tracks(kern, br, branch_tracks(kern, br), "enumerate")
    state = cache["state"]
    n_k = br.n_branches
    half_r2 = 0.5 * cfg.r * cfg.r
    z = np.empty(rows.size)
    logd = np.empty((n_k, rows.size))
    for i, (t, j) in enumerate(zip(rows, cols)):
        key = (int(t), int(j))
        if key not in cache:
            cache[key] = [state.n_distribution(k, key) for k in range(n_k)]
        dists = cache[key]
        vals, probs = dists[k_true]
        n = vals[min(int(np.searchsorted(np.cumsum(probs), rng.random(), side="right")), vals.size - 1)]
        z[i] = n + rng.normal(0.0, math.sqrt(half_r2))
        for k in range(n_k):
            vk, pk = dists[k]
            dens = pk @ np.exp(-0.5 * (z[i] - vk) ** 2 / half_r2) / math.sqrt(2 * math.pi * half_r2)
            logd[k, i] = math.log(max(dens, 1e-300))
    return z, logd
