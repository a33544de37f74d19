"""Random streams, Poisson processes and sampling of hit values.

Every trajectory owns a counter-based Philox generator keyed by
``(master_seed, stream_id)``, so a run gives the same numbers whatever the
worker count or completion order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateStateError


def rng_stream(master_seed: int, *stream_id: int) -> np.random.Generator:
    """Independent generator for one (master_seed, stream path) pair."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(s) for s in stream_id))
    return np.random.Generator(np.random.Philox(seq))


def hit_norm_constant(r: float, dim: int = 1) -> float:
    """Prefactor ``(pi r^2)^(-dim/4)`` making the squared hit operators resolve the identity."""
    return (math.pi * r * r) ** (-dim / 4.0)


def hit_density(values, z, r: float):
    """``c^2 exp(-(values - z)^2 / r^2)``: a normal density in z of std ``r/sqrt(2)``."""
    return np.exp(-((np.asarray(values) - z) ** 2) / (r * r)) / math.sqrt(math.pi * r * r)


def poisson_times(rate: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Event times of a homogeneous Poisson process on ``[0, horizon)``."""
    if not (math.isfinite(rate) and math.isfinite(horizon)):
        raise ConfigurationError("rate and horizon must be finite")
    if rate < 0:
        raise ConfigurationError(f"rate must be >= 0, got {rate}")
    if horizon <= 0:
        raise ConfigurationError(f"horizon must be > 0, got {horizon}")
    if rate == 0:
        return np.empty(0)
    times = []
    t = 0.0
    chunk = max(16, int(rate * horizon * 1.2) + 16)
    while True:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        cum = t + np.cumsum(gaps)
        keep = cum[cum < horizon]
        times.append(keep)
        if keep.size < chunk:
            break
        t = cum[-1]
    return np.concatenate(times)


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle ``[t0, t1) x [x0, x1)`` in (t, x) coordinates."""

    t0: float
    t1: float
    x0: float
    x1: float

    @property
    def area(self) -> float:
        return (self.t1 - self.t0) * (self.x1 - self.x0)


@dataclass
class Sprinkling:
    region: Region
    density: float
    points: np.ndarray  # shape (n, 2): columns t, x; sorted by t

    def __len__(self):
        return len(self.points)


def sprinkle(region: Region, density: float, rng: np.random.Generator) -> Sprinkling:
    """Poisson sprinkling of ``region`` with ``density`` points per unit spacetime volume."""
    if density < 0 or not math.isfinite(density):
        raise ConfigurationError(f"sprinkling density must be finite and >= 0, got {density}")
    if region.area <= 0:
        raise ConfigurationError("sprinkling region must have positive area")
    n = rng.poisson(density * region.area) if density > 0 else 0
    t = rng.uniform(region.t0, region.t1, size=n)
    x = rng.uniform(region.x0, region.x1, size=n)
    pts = np.column_stack([t, x]) if n else np.empty((0, 2))
    return Sprinkling(region, density, pts[np.argsort(pts[:, 0], kind="stable")])


@dataclass
class SpectralWeights:
    """Unnormalized weights ``w_n`` on eigenvalues ``n`` of a localized operator."""

    eigenvalues: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.eigenvalues.shape != self.weights.shape:
            raise ConfigurationError("eigenvalues and weights differ in length")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ConfigurationError("weights must be finite and non-negative")

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def density(self, z, r: float):
        """Normalized density of Z, ``sum_n w_n c^2 exp(-(n-z)^2/r^2) / sum w``."""
        z = np.asarray(z, dtype=float)
        out = hit_density(self.eigenvalues[:, None], z.reshape(1, -1), r).T @ self.weights
        return (out / self.total).reshape(z.shape)


def sample_Z(weights: SpectralWeights, r: float, rng: np.random.Generator) -> float:
    """Draw Z from the Gaussian mixture defined by ``weights`` and width ``r``.

    Picks eigenvalue n with probability ``w_n / sum w`` and adds a normal
    deviate of standard deviation ``r / sqrt(2)``.
    """
    total = weights.total
    if not total > 0:
        raise DegenerateStateError("all spectral weights are zero")
    if r <= 0:
        raise ConfigurationError(f"r must be > 0, got {r}")
    u = rng.random() * total
    idx = int(np.searchsorted(np.cumsum(weights.weights), u, side="right"))
    idx = min(idx, weights.weights.size - 1)
    return float(weights.eigenvalues[idx] + rng.normal(0.0, r / math.sqrt(2.0)))
