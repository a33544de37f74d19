import math

import numpy as np
import pytest
from scipy import stats

from collapsesim.experiments import (
    biased_sprinkle,
    boost,
    boosted_square,
    epr_instance,
    expected_post_norm,
    parallel_map,
    poisson_chi2,
    run_experiment,
    scaling_instance,
    sweep_values,
)
from collapsesim.config import resolve
from collapsesim.relmodel import steady_moments
from collapsesim.stochastic import Region, rng_stream, sprinkle


def _square(x):
    return x * x


def test_parallel_map_keeps_order():
    items = list(range(37))
    assert parallel_map(_square, items, workers=3) == [x * x for x in items]


def test_boost_preserves_interval_and_area():
    pts = np.array([[1.0, 0.3], [2.0, -1.5]])
    out = boost(pts, 0.8)
    assert np.allclose(out[:, 0] ** 2 - out[:, 1] ** 2, pts[:, 0] ** 2 - pts[:, 1] ** 2)
    box, inside = boosted_square(2.0, 1.0)
    rng = rng_stream(0)
    s = sprinkle(box, 2000.0, rng)
    frac = inside(s.points).mean()
    assert frac * box.area == pytest.approx(4.0, rel=0.02)


def test_poisson_chi2_accepts_poisson_and_pools_bins():
    counts = rng_stream(1).poisson(20.0, size=5000)
    stat, p, dof = poisson_chi2(counts, 20.0)
    assert p > 0.001 and dof > 5
    _, p_bad, _ = poisson_chi2(counts + 1, 20.0)
    assert p_bad < 1e-6


def test_biased_sprinkler_keeps_mean_but_not_shape():
    region = Region(0, 1, 0, 1)
    rng = rng_stream(2)
    pts = np.concatenate([biased_sprinkle(region, 50.0, 0.8, rng) for _ in range(200)])
    assert len(pts) / 200 == pytest.approx(50.0, rel=0.05)
    # density 1 + b (2u - 1)^2 piles up at the edges
    edges = np.mean((pts[:, 1] < 0.2) | (pts[:, 1] > 0.8))
    assert edges > 0.4 + 0.05


def test_expected_post_norm_on_mixture():
    # integral of sum_n w_n c^2 exp(-(n - z)^2 / r^2) dz = sum_n w_n
    from collapsesim.stochastic import hit_density

    vals, w = np.array([0.0, 1.0, 4.0]), np.array([0.2, 0.3, 0.4])
    got = expected_post_norm(lambda z: float(w @ hit_density(vals, z, 0.3)), vals, 0.3)
    assert got == pytest.approx(0.9, abs=1e-12)


def test_sweep_spans_a_decade():
    cfg = resolve("scaling", {"r": 3.0, "sweep": "r"})
    vals = sweep_values(cfg)
    assert len(vals) == cfg["points"]
    assert vals[-1] / vals[0] == pytest.approx(10.0)


def test_scaling_instances_in_regime():
    for sweep in ("mu", "r", "V_delta", "J"):
        extra = {"r": 30.0, "J": 0.15, "mu": 0.05} if sweep == "J" else {"r": 3.0}
        cfg = resolve("scaling", {"sweep": sweep, **extra})
        for v in sweep_values(cfg):
            rc = scaling_instance(cfg, v)
            m, _, _ = steady_moments(rc)
            assert rc.r >= 3 * np.max(np.abs(m[0] - m[1]))


def test_epr_branches_are_anticorrelated():
    cfg = resolve("epr", {"r": 1.0})
    rc, regions = epr_instance(cfg)
    prof = rc.branches.profiles[:, 0, :] > 0
    b = cfg["block"]
    l0, r0 = regions["left"][0], regions["right"][0]
    blocks = {"left_A": slice(l0, l0 + b), "left_B": slice(l0 + b, l0 + 2 * b), "right_A": slice(r0, r0 + b), "right_B": slice(r0 + b, r0 + 2 * b)}
    occupied = [{k for k, sl in blocks.items() if prof[k_, sl].all()} for k_ in range(2)]
    assert occupied == [{"left_A", "right_B"}, {"left_B", "right_A"}]
    assert prof.sum() == 4 * b
    assert regions["right"][0] - regions["left"][1] == cfg["gap"]


def test_martingale_experiment():
    res = run_experiment("martingale", {"r": 0.7})
    assert res.passed
    assert res.summary["max_deviation"] < 1e-8


def test_path_independence_single_order_is_trivially_zero():
    res = run_experiment("path_independence", {"r": 1.0, "trials": 1})
    assert res.summary["max_pairwise_causal"] == 0.0


def test_sprinkling_small_run_structure():
    res = run_experiment("sprinkling_invariance", {"trials": 500})
    assert res.columns == ["draw", "count_eta_0", "count_eta_0.5", "count_eta_1", "count_control"]
    counts = np.array([r[1:4] for r in res.rows])
    assert counts.mean() == pytest.approx(20.0, rel=0.05)


def test_epr_small_run():
    res = run_experiment("epr", {"r": 1.0, "trials": 40})
    assert res.summary["reduced"] == 40
    assert res.summary["correlation"] == -1.0


def test_born_rel_small_run_reduces():
    res = run_experiment("born", {"r": 1.0, "model": "rel", "trials": 200})
    s = res.summary
    assert s["unreduced"] == 0
    assert abs(s["frequency_1"] - 0.7) < 4 * math.sqrt(0.21 / 200)


def test_seed_changes_results():
    a = run_experiment("sprinkling_invariance", {"trials": 50}, seed=1)
    b = run_experiment("sprinkling_invariance", {"trials": 50}, seed=2)
    assert a.rows != b.rows
    assert stats.describe([r[1] for r in a.rows]).nobs == 50
