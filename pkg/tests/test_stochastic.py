import math

import numpy as np
import pytest
from scipy import integrate, stats

from collapsesim.errors import ConfigurationError, DegenerateStateError
from collapsesim.stochastic import (
    Region,
    SpectralWeights,
    hit_density,
    poisson_times,
    rng_stream,
    sample_Z,
    sprinkle,
)


def test_streams_are_reproducible_and_distinct():
    a = rng_stream(7, 1, 2).random(5)
    assert np.array_equal(a, rng_stream(7, 1, 2).random(5))
    assert not np.array_equal(a, rng_stream(7, 1, 3).random(5))
    assert not np.array_equal(a, rng_stream(8, 1, 2).random(5))


def test_hit_density_integrates_to_one():
    val, _ = integrate.quad(lambda z: hit_density(2.0, z, 0.7), -np.inf, np.inf)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_poisson_times_count_and_order():
    rng = rng_stream(1, 0)
    counts = [poisson_times(4.0, 2.5, rng).size for _ in range(4000)]
    assert np.mean(counts) == pytest.approx(10.0, abs=0.2)
    t = poisson_times(50.0, 1.0, rng)
    assert np.all(np.diff(t) > 0) and t.max() < 1.0


@pytest.mark.parametrize("rate,horizon", [(-1, 1), (1, 0), (math.inf, 1)])
def test_poisson_times_rejects(rate, horizon):
    with pytest.raises(ConfigurationError):
        poisson_times(rate, horizon, rng_stream(0))


def test_sprinkle_counts_are_poisson():
    region = Region(0, 2, 0, 3)
    rng = rng_stream(3, 0)
    counts = np.array([len(sprinkle(region, 1.5, rng)) for _ in range(3000)])
    assert counts.mean() == pytest.approx(9.0, abs=0.2)
    assert counts.var() == pytest.approx(9.0, rel=0.1)


def test_sprinkle_points_inside_and_time_sorted():
    s = sprinkle(Region(1, 2, -1, 1), 200.0, rng_stream(0))
    t, x = s.points.T
    assert np.all((t >= 1) & (t < 2) & (x >= -1) & (x < 1))
    assert np.all(np.diff(t) >= 0)


def test_vacuum_z_is_normal_with_width_r_over_root_two():
    r = 0.9
    w = SpectralWeights([0.0], [1.0])
    rng = rng_stream(5, 0)
    z = np.array([sample_Z(w, r, rng) for _ in range(4000)])
    assert stats.kstest(z, "norm", args=(0.0, r / math.sqrt(2))).pvalue > 0.01


def test_mixture_density_normalized_and_sampled():
    w = SpectralWeights([0, 1, 3], [0.2, 0.5, 0.3])
    r = 0.6
    val, _ = integrate.quad(lambda z: float(w.density(z, r)), -10, 15, points=[0, 1, 3])
    assert val == pytest.approx(1.0, abs=1e-10)
    rng = rng_stream(2, 0)
    z = np.array([sample_Z(w, r, rng) for _ in range(5000)])
    mean = 0.5 + 0.9
    assert z.mean() == pytest.approx(mean, abs=0.06)


def test_all_zero_weights_rejected():
    with pytest.raises(DegenerateStateError):
        sample_Z(SpectralWeights([0, 1], [0, 0]), 1.0, rng_stream(0))
