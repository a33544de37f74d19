"""Seeded experiments: Born statistics, martingale checks, timescale scaling,
path independence, EPR correlations and sprinkling boost invariance.

Every experiment is a function of a resolved config (see :mod:`collapsesim.config`)
and returns an :class:`ExperimentResult`.  Trial ``i`` draws from
``rng_stream(master_seed, experiment_id, ..., i)``, so results do not depend
on the worker count.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate, stats

from . import config as cfgmod
from .errors import ConfigurationError
from .fieldloc import (
    FieldLocConfig,
    SmearKernel,
    apply_field_hit,
    cluster_state,
    run_fieldloc,
    smeared_number_op,
)
from .grw import GrwConfig, apply_localization, run_grw, two_packet_state
from .hilbert import StateVector, norm2
from .relmodel import (
    ExactState,
    Hit,
    RelConfig,
    RelativisticModel,
    SpacetimeLattice,
    acausal_control_kernels,
    cell_branches,
    make_kernels,
    random_admissible_order,
    sprinkle_hits,
    static_branches,
    static_reduction_time,
    steady_moments,
)
from .stochastic import Region, rng_stream, sprinkle

STREAM = {name: i + 1 for i, name in enumerate(cfgmod.EXPERIMENTS)}


@dataclass
class ExperimentResult:
    name: str
    config: dict
    config_digest: str
    master_seed: int
    columns: list[str]
    rows: list[tuple]
    summary: dict[str, Any] = field(default_factory=dict)
    criteria: list[dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.criteria)

    def check(self, name: str, value, target: str, passed: bool) -> None:
        self.criteria.append({"name": name, "value": value, "target": target, "passed": bool(passed)})

    def as_dict(self) -> dict:
        body = {k: v for k, v in self.config.items() if k not in ("workers", "out_dir")}
        return _plain(
            {
                "experiment": self.name,
                "config_digest": self.config_digest,
                "master_seed": self.master_seed,
                "config": body,
                "columns": self.columns,
                "n_rows": len(self.rows),
                "summary": self.summary,
                "criteria": self.criteria,
                "passed": self.passed,
            }
        )


def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_outputs(result: ExperimentResult, out_dir: str) -> tuple[str, str]:
    """Write ``<name>.json`` and ``<name>.csv``; both start with the digest and seed."""
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{result.name}.json")
    csv_path = os.path.join(out_dir, f"{result.name}.csv")
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# experiment: {result.name}\n")
        fh.write(f"# config_digest: {result.config_digest}\n")
        fh.write(f"# master_seed: {result.master_seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_cell(v) for v in row])
    return json_path, csv_path


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally over a process pool; order follows ``items``."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


_CACHE: dict = {}


def _cached(key, build):
    if key not in _CACHE:
        if len(_CACHE) > 32:
            _CACHE.clear()
        _CACHE[key] = build()
    return _CACHE[key]


def _key(cfg: dict, *extra) -> str:
    return json.dumps([cfg, extra], sort_keys=True, default=str)


def _result(name: str, cfg: dict, columns, rows) -> ExperimentResult:
    return ExperimentResult(name, cfg, cfgmod.digest(cfg), cfg["master_seed"], list(columns), rows)


def _binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n) if n else math.inf


# ---------------------------------------------------------------- Born rule


def build_rel_config(rel: dict, r: float, weights, threshold: float = 0.99) -> RelConfig:
    """Two-branch static-lump relativistic config from a ``rel`` config block."""
    lat = SpacetimeLattice(rel["n_t"], rel["n_x"], rel["a_t"], rel["a_x"])
    kern = make_kernels(lat, rel["d_f"], rel["d_g"], rel["g0"], rel["profile"], rel["s"])
    amps = np.sqrt(np.asarray(weights, dtype=float))
    j_vals = [b.get("J", rel["J"]) for b in rel["branches"]]
    br = static_branches(lat, amps, [b["columns"] for b in rel["branches"]], J=j_vals)
    return RelConfig(
        kern, br, rel["mu"], r, tier=rel["tier"], mode=rel["mode"], n_max=rel["n_max"],
        dim_cap=rel["dim_cap"], threshold=threshold,
    )


def _fieldloc_setup(fl: dict, r: float, weights):
    kernel = SmearKernel.gaussian(fl["kernel_width"], fl["kernel_radius"]) if fl["kernel_width"] > 0 else SmearKernel.delta()
    hop = "hopping" if fl.get("J_hop", 0.0) != 0 else "none"
    config = FieldLocConfig(fl["n_sites"], fl["n_max"], kernel, r, fl.get("mu", 1.0), hop, fl.get("J_hop", 0.0), fl.get("T", 1.0), fl.get("dt", 0.1))
    space = config.space
    a, b = fl.get("sites", (0, 1))
    k = fl.get("cluster", 1)
    state = cluster_state(space, {a: math.sqrt(weights[0]), b: math.sqrt(weights[1])}, k)
    masks = [space.occupation(a) == k, space.occupation(b) == k]
    return config, state, masks


def _grw_setup(g: dict, r: float, weights):
    config = GrwConfig(
        n_sites=g["n_sites"], dx=g["dx"], hamiltonian=g.get("hamiltonian", "none"), omega=g.get("omega", 1.0),
        lam=g.get("lam", 1.0), r=r, T=g.get("T", 1.0), dt=g.get("dt", 0.01),
    )
    return config, two_packet_state(config, g["separation"] * r, weights[1], g["sigma"])


def _born_trial(cfg: dict, index: int) -> tuple:
    rng = rng_stream(cfg["master_seed"], STREAM["born"], index)
    model, r, w, thr = cfg["model"], cfg["r"], cfg["weights"], cfg["threshold"]
    if model == "grw":
        config, state = _cached(_key(cfg, "grw"), lambda: _grw_setup(cfg["grw"], r, w))
        traj = run_grw(config, state, rng)
        right = float(np.sum(traj.final_state.probabilities()[config.coords > 0]))
        outcome = 1 if right >= thr else (0 if right <= 1 - thr else None)
        return index, outcome, right, len(traj.hits)
    if model == "fieldloc":
        config, state, masks = _cached(_key(cfg, "fieldloc"), lambda: _fieldloc_setup(cfg["fieldloc"], r, w))
        rec = run_fieldloc(config, state, rng, masks)
        return index, rec.outcome(thr), float(rec.final_weights[1]), len(rec.hits)
    model_obj = _cached(_key(cfg, "rel"), lambda: RelativisticModel(build_rel_config(cfg["rel"], r, w, thr)))
    rec = model_obj.run(rng, stop_weight=thr)
    return index, rec.outcome(thr), float(rec.final_weights[1]), len(rec.hits)


def exp_born(cfg: dict) -> ExperimentResult:
    """Two-outcome superposition; frequency of outcome 1 against its Born weight."""
    rows = parallel_map(functools.partial(_born_trial, cfg), range(cfg["trials"]), cfg["workers"])
    res = _result("born", cfg, ["trial", "outcome", "final_weight_1", "n_hits"], rows)
    outcomes = [o for _, o, _, _ in rows if o is not None]
    n = len(outcomes)
    p = float(cfg["weights"][1])
    freq = float(np.mean([o == 1 for o in outcomes])) if n else math.nan
    sigma = _binomial_sigma(p, n)
    res.summary = {
        "model": cfg["model"],
        "reduced": n,
        "unreduced": len(rows) - n,
        "frequency_1": freq,
        "expected_1": p,
        "sigma": sigma,
        "ci_3sigma": [p - 3 * sigma, p + 3 * sigma],
        "mean_hits": float(np.mean([h for *_, h in rows])),
    }
    res.check("frequency_1 within 3 sigma of weight", freq, f"{p} +- {3 * sigma:.6g}", n > 0 and abs(freq - p) <= 3 * sigma)
    return res


# ---------------------------------------------------------------- martingale


def expected_post_norm(post: Callable[[float], float], centers, r: float) -> float:
    """``integral dz post(z)`` by adaptive quadrature, split at the eigenvalues ``centers``."""
    pts = np.unique(np.round(np.asarray(centers, dtype=float), 12))
    lo, hi = pts[0] - 12 * r, pts[-1] + 12 * r
    inner = pts if pts.size <= 512 else np.linspace(pts[0], pts[-1], 513)
    edges = np.concatenate([[lo], inner, [hi]])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            total += integrate.quad(post, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return total


def _martingale_cases(cfg: dict) -> list[tuple[str, str, float, Callable, np.ndarray]]:
    r = cfg["r"]
    rng = rng_stream(cfg["master_seed"], STREAM["martingale"], 0)
    cases = []
    want = cfg["model"]
    if want in ("all", "grw"):
        g = cfg["grw"]
        config = GrwConfig(n_sites=g["n_sites"], dx=g["dx"], hamiltonian="none", r=r)
        coords = config.coords
        state = two_packet_state(config, g["separation"] * r, 0.7, g["sigma"])
        cases.append(("grw", "two_packet", state, lambda z, s=state: norm2(apply_localization(s, 0, z, r, coords)), coords))
        amp = rng.normal(size=config.n_sites) + 1j * rng.normal(size=config.n_sites)
        rnd = StateVector(config.space, amp / np.linalg.norm(amp))
        cases.append(("grw", "random", rnd, lambda z, s=rnd: norm2(apply_localization(s, 0, z, r, coords)), coords))
    if want in ("all", "fieldloc"):
        fl = cfg["fieldloc"]
        kernel = SmearKernel.gaussian(fl["kernel_width"], fl["kernel_radius"]) if fl["kernel_width"] > 0 else SmearKernel.delta()
        space = FieldLocConfig(fl["n_sites"], fl["n_max"], kernel, r).space
        eig = smeared_number_op(1, kernel, space).diag
        vac = np.zeros(space.dim, dtype=complex)
        vac[0] = 1
        vac_state = StateVector(space, vac)
        cases.append(("fieldloc", "vacuum", vac_state, lambda z, s=vac_state: norm2(apply_field_hit(s, 1, z, r, kernel)), np.array([0.0])))
        amp = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
        rnd = StateVector(space, amp / np.linalg.norm(amp))
        cases.append(("fieldloc", "random", rnd, lambda z, s=rnd: norm2(apply_field_hit(s, 1, z, r, kernel)), eig))
    if want in ("all", "rel"):
        for label, state, cell in _rel_martingale_states(rng):
            eig = state.n_tensor(cell)

            def post(z, s=state, c=cell):
                return s.copy().hit(c, z, r)[1]

            cases.append(("rel", label, state, post, np.unique(eig)))
    return cases


def _rel_martingale_states(rng) -> list[tuple[str, ExactState, tuple]]:
    out = []
    lat = SpacetimeLattice(3, 3)
    kern = make_kernels(lat, 1, 1)
    vac = ExactState(kern, cell_branches(lat, [1.0], [{}]), n_max=2)
    for c in [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1)]:
        vac.step(c)
    out.append(("vacuum", vac, (2, 1)))
    # one mode in the f-window, so N takes three values
    lat1 = SpacetimeLattice(3, 1)
    kern1 = make_kernels(lat1, 1, 1)
    three = ExactState(kern1, cell_branches(lat1, [1.0], [{(0, 0): 0.8}]), n_max=2)
    for c in [(0, 0), (1, 0), (2, 0)]:
        three.step(c)
    three.spectral_weights((2, 0))
    amp = rng.normal(size=3) + 1j * rng.normal(size=3)
    three.psi = (amp / np.linalg.norm(amp)).reshape(1, 3)
    out.append(("three_eigenvalue", three, (2, 0)))
    lat6 = SpacetimeLattice(6, 6)
    src = cell_branches(lat6, [math.sqrt(0.5), math.sqrt(0.5)], [{(0, 1): 0.6, (1, 2): 0.4}, {(0, 4): 0.6}])
    full = ExactState(make_kernels(lat6, 1, 1), src, n_max=5)
    for t in range(3):
        for j in range(6):
            full.step((t, j))
    full.spectral_weights((2, 2))
    out.append(("two_branch_sourced", full, (2, 2)))
    return out


def exp_martingale(cfg: dict) -> ExperimentResult:
    """``|E_Z[norm2 after hit] - norm2 before|`` by quadrature for each model's test states."""
    tol = cfg["tolerance"]
    rows = []
    for model, label, state, post, centers in _martingale_cases(cfg):
        pre = state.norm2() if isinstance(state, ExactState) else norm2(state)
        mean_post = expected_post_norm(post, centers, cfg["r"])
        rows.append((model, label, pre, mean_post, abs(mean_post - pre)))
    res = _result("martingale", cfg, ["model", "state", "pre_norm2", "expected_post_norm2", "deviation"], rows)
    res.summary = {"max_deviation": max(r[-1] for r in rows), "tolerance": tol, "cases": len(rows)}
    for model, label, _, _, dev in rows:
        res.check(f"{model}/{label} deviation", dev, f"< {tol}", dev < tol)
    return res


# ---------------------------------------------------------------- scaling


def sweep_values(cfg: dict) -> list[float]:
    if cfg.get("values"):
        return [float(v) for v in cfg["values"]]
    base = {"mu": cfg["mu"], "r": cfg["r"], "J": cfg["J"], "V_delta": cfg["V_delta_cells"]}[cfg["sweep"]]
    n = cfg["points"]
    vals = [base * cfg["span"] ** (k / (n - 1)) for k in range(n)]
    if cfg["sweep"] == "V_delta":
        vals = sorted({float(max(1, round(v))) for v in vals})
    return vals


def scaling_instance(cfg: dict, value: float) -> RelConfig:
    """Static lumps on disjoint columns; only the swept parameter changes between points."""
    p = {"mu": cfg["mu"], "r": cfg["r"], "J": cfg["J"], "V_delta": cfg["V_delta_cells"]}
    p[cfg["sweep"]] = value
    cells = int(round(p["V_delta"]))
    n0 = (cells + 1) // 2
    lat = SpacetimeLattice(4, cells + 2, cfg["a_t"], cfg["a_x"])
    cols = [list(range(1, 1 + n0)), list(range(1 + n0, 1 + cells))]
    br = static_branches(lat, [math.sqrt(0.5), math.sqrt(0.5)], cols, J=p["J"])
    kern = make_kernels(lat, 1, 1, cfg["g0"])
    return RelConfig(kern, br, p["mu"], p["r"], mode=cfg["mode"], threshold=cfg["threshold"])


def _scaling_trial(cfg: dict, item: tuple[int, int]) -> tuple:
    point, trial = item
    value = sweep_values(cfg)[point]
    rc = _cached(_key(cfg, "scaling", point), lambda: scaling_instance(cfg, value))
    moments = _cached(_key(cfg, "moments", point), lambda: steady_moments(rc))
    rng = rng_stream(cfg["master_seed"], STREAM["scaling"], point, trial)
    tau = static_reduction_time(rc, rng, cfg["max_time"], moments=moments)
    return point, value, trial, (math.nan if tau is None else tau)


def exp_scaling(cfg: dict) -> ExperimentResult:
    """Median reduction time against one parameter; slope of the log-log fit."""
    sweep = cfg["sweep"]
    values = sweep_values(cfg)
    items = [(p, t) for p in range(len(values)) for t in range(cfg["trials"])]
    rows = parallel_map(functools.partial(_scaling_trial, cfg), items, cfg["workers"])
    res = _result("scaling", cfg, ["point", "value", "trial", "tau"], rows)
    expected, tol = cfgmod.SCALING_TARGETS[sweep]
    expected = cfg.get("expected_slope", expected)
    tol = cfg.get("slope_tolerance", tol)
    points = []
    for p, value in enumerate(values):
        taus = np.array([row[3] for row in rows if row[0] == p])
        reduced = float(np.mean(np.isfinite(taus)))
        rc = scaling_instance(cfg, value)
        m, _, _ = steady_moments(rc)
        dm = float(np.max(np.abs(m[0] - m[1])))
        regime = rc.r >= 3 * dm
        x = value * cfg["a_x"] if sweep == "V_delta" else value
        med = float(np.median(np.where(np.isfinite(taus), taus, np.inf)))
        included = reduced >= cfg["min_reduced"] and regime and math.isfinite(med) and med > 0
        points.append({"value": x, "median_tau": med, "reduced_fraction": reduced, "max_delta_m": dm, "regime_ok": regime, "included": included})
    used = [q for q in points if q["included"]]
    summary: dict[str, Any] = {"sweep": sweep, "points": points, "expected_slope": expected, "slope_tolerance": tol}
    if len(used) >= 2:
        fit = stats.linregress(np.log([q["value"] for q in used]), np.log([q["median_tau"] for q in used]))
        summary.update(slope=float(fit.slope), slope_stderr=float(fit.stderr), intercept=float(fit.intercept), r_value=float(fit.rvalue))
        span = used[-1]["value"] / used[0]["value"]
    else:
        summary.update(slope=math.nan, slope_stderr=math.nan)
        span = 1.0
    summary["points_used"] = len(used)
    summary["span_used"] = span
    res.summary = summary
    slope = summary["slope"]
    res.check(f"{sweep} slope", slope, f"{expected} +- {tol}", math.isfinite(slope) and abs(slope - expected) <= tol)
    res.check("points in fit", len(used), ">= 5", len(used) >= 5)
    res.check("fitted span (max/min value)", span, ">= 10", span >= 10 * (1 - 1e-9))
    return res


# ---------------------------------------------------------------- path independence


def path_instance(cfg: dict, control: bool = False):
    lat = SpacetimeLattice(cfg["n_t"], cfg["n_x"])
    kern = acausal_control_kernels(lat, 1, 1, leak=cfg["leak"]) if control else make_kernels(lat, 1, 1)
    sources: list[dict] = [dict() for _ in cfg["weights"]]
    for s in cfg["sources"]:
        sources[s["branch"]][tuple(s["cell"])] = s["J"]
    return kern, cell_branches(lat, np.sqrt(np.asarray(cfg["weights"], dtype=float)), sources)


def _path_states(cfg: dict, control: bool, orders, z_values, hits) -> list[np.ndarray]:
    kern, br = path_instance(cfg, control)
    model = RelativisticModel(RelConfig(kern, br, 0.0, cfg["r"], tier="exact", n_max=cfg["n_max"], dim_cap=cfg["dim_cap"], eliminate=False))
    out = []
    for order in orders:
        rec = model.run(None, hits=hits, order=order, z_values=z_values)
        out.append((rec.final_state.canonical()[1], rec.flags["max_leakage"]))
    return out


def _max_pairwise(states: list[np.ndarray]) -> float:
    worst = 0.0
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            worst = max(worst, float(np.max(np.abs(states[i] - states[j]))))
    return worst


def exp_path_independence(cfg: dict) -> ExperimentResult:
    """Final exact-tier states over random admissible sweep orders, with an acausal control."""
    kern, br = path_instance(cfg)
    lat = kern.lattice
    hits = [Hit(t * lat.a_t + 0.5, (t, j)) for t, j in sorted(map(tuple, cfg["hits"]))]
    ref_model = RelativisticModel(RelConfig(kern, br, 0.0, cfg["r"], tier="exact", n_max=cfg["n_max"], dim_cap=cfg["dim_cap"]))
    ref = ref_model.run(rng_stream(cfg["master_seed"], STREAM["path_independence"], 0), hits=hits)
    counts: dict = {}
    z_values = {}
    for h in ref.hits:
        i = counts.get(h.location, 0)
        counts[h.location] = i + 1
        z_values[(h.location, i)] = h.z
    orders, tilts = [], []
    for i in range(cfg["trials"]):
        rng = rng_stream(cfg["master_seed"], STREAM["path_independence"], 1, i)
        tilt = float(rng.uniform(-cfg["tilt"], cfg["tilt"]))
        tilts.append(tilt)
        orders.append(random_admissible_order(lat, rng, tilt))
    causal = _path_states(cfg, False, orders, z_values, hits)
    control = _path_states(cfg, True, orders, z_values, hits)
    rows = []
    for i, tilt in enumerate(tilts):
        rows.append((
            i, tilt,
            float(np.max(np.abs(causal[i][0] - causal[0][0]))),
            float(np.max(np.abs(control[i][0] - control[0][0]))),
            causal[i][1],
        ))
    res = _result("path_independence", cfg, ["order", "tilt", "causal_diff_vs_first", "control_diff_vs_first", "max_leakage"], rows)
    d_causal = _max_pairwise([s for s, _ in causal])
    d_control = _max_pairwise([s for s, _ in control])
    res.summary = {
        "orders": len(orders),
        "max_pairwise_causal": d_causal,
        "max_pairwise_control": d_control,
        "max_leakage": max(leak for _, leak in causal),
        "z_values": [[list(c), i, z] for (c, i), z in sorted(z_values.items())],
    }
    res.check("causal kernels: max pairwise difference", d_causal, f"< {cfg['tolerance']}", d_causal < cfg["tolerance"])
    if len(orders) > 1:
        res.check("acausal control: max pairwise difference", d_control, f"> {cfg['control_min']}", d_control > cfg["control_min"])
    return res


# ---------------------------------------------------------------- EPR


def epr_instance(cfg: dict) -> tuple[RelConfig, dict]:
    """Branch 0: matter at left-A and right-B; branch 1: left-B and right-A."""
    b, gap = cfg["block"], cfg["gap"]
    left_a, left_b = list(range(0, b)), list(range(b, 2 * b))
    right0 = 2 * b + gap
    right_a, right_b = list(range(right0, right0 + b)), list(range(right0 + b, right0 + 2 * b))
    n_x = right0 + 2 * b
    lat = SpacetimeLattice(cfg["n_t"], n_x, cfg["a_t"], cfg["a_x"])
    kern = make_kernels(lat, 1, 1)
    amps = np.sqrt(np.asarray(cfg["weights"], dtype=float))
    br = static_branches(lat, amps, [left_a + right_b, left_b + right_a], J=cfg["J"])
    regions = {"left": (0, 2 * b), "right": (right0, right0 + 2 * b)}
    rc = RelConfig(kern, br, cfg["mu"], cfg["r"], hit_columns=tuple(regions.values()))
    return rc, regions


def _epr_hits(rc: RelConfig, regions: dict, staggered: bool, rng) -> list[Hit]:
    lat = rc.lattice
    if not staggered:
        return sprinkle_hits(rc, rng)
    half = (lat.n_t // 2) * lat.a_t
    windows = {"left": (0.0, half), "right": (half, lat.n_t * lat.a_t)}
    hits = []
    for name, (c0, c1) in regions.items():
        t0, t1 = windows[name]
        for t, x in sprinkle(Region(t0, t1, c0 * lat.a_x, c1 * lat.a_x), rc.mu, rng).points:
            hits.append(Hit(float(t), lat.cell_of(t, x)))
    hits.sort(key=lambda h: h.time)
    return hits


def _epr_trial(cfg: dict, index: int) -> tuple:
    rc, regions = _cached(_key(cfg, "epr"), lambda: epr_instance(cfg))
    model = _cached(_key(cfg, "epr-model"), lambda: RelativisticModel(rc))
    rng = rng_stream(cfg["master_seed"], STREAM["epr"], index)
    staggered = index % 2 == 1
    hits = _epr_hits(rc, regions, staggered, rng)
    rec = model.run(rng, hits=hits)
    bound = math.log(cfg["local_threshold"] / (1 - cfg["local_threshold"]))
    llr = {"left": 0.0, "right": 0.0}
    first = {"left": math.nan, "right": math.nan}
    for h in rec.hits:
        name = "left" if h.location[1] < regions["left"][1] else "right"
        ld = model.log_densities(h.location, h.z)
        llr[name] += float(ld[0] - ld[1])
        if math.isnan(first[name]) and abs(llr[name]) >= bound:
            first[name] = h.time
    reduced = abs(llr["left"]) >= bound and abs(llr["right"]) >= bound
    s_left = 1 if llr["left"] > 0 else -1  # +1: left-A occupied (branch 0 pattern)
    s_right = -1 if llr["right"] > 0 else 1  # +1: right-A occupied
    branch = rec.outcome(rc.threshold)
    return index, int(staggered), int(reduced), s_left, s_right, llr["left"], llr["right"], first["left"], first["right"], -1 if branch is None else branch


def exp_epr(cfg: dict) -> ExperimentResult:
    """Anticorrelated two-region branches; local outcomes from each region's own hits."""
    rows = parallel_map(functools.partial(_epr_trial, cfg), range(cfg["trials"]), cfg["workers"])
    cols = ["trial", "staggered", "reduced", "s_left", "s_right", "llr_left", "llr_right", "t_left", "t_right", "branch"]
    res = _result("epr", cfg, cols, rows)
    red = [row for row in rows if row[2]]
    n = len(red)
    s_l = np.array([row[3] for row in red], dtype=float)
    s_r = np.array([row[4] for row in red], dtype=float)
    p0 = float(cfg["weights"][0])
    marg_l = float(np.mean(s_l > 0)) if n else math.nan
    marg_r = float(np.mean(s_r < 0)) if n else math.nan
    prod = float(np.mean(s_l * s_r)) if n else math.nan
    anti = float(np.mean(s_l != s_r)) if n else math.nan
    pearson = float(np.corrcoef(s_l, s_r)[0, 1]) if n > 1 and s_l.std() > 0 and s_r.std() > 0 else math.nan
    stag = [row for row in red if row[1]]
    anti_stag = float(np.mean([row[3] != row[4] for row in stag])) if stag else math.nan
    left_first = [row for row in red if row[7] < row[8]]
    right_first = [row for row in red if row[8] < row[7]]
    sig_m = _binomial_sigma(p0, n)
    sig_c = 2 * _binomial_sigma(anti, n) if n else math.inf
    sig_s = _binomial_sigma(anti_stag, len(stag)) if stag else math.inf
    res.summary = {
        "reduced": n,
        "unreduced": len(rows) - n,
        "marginal_left_A": marg_l,
        "marginal_right_B": marg_r,
        "correlation": prod,
        "pearson": pearson,
        "anticorrelated_fraction": anti,
        "staggered_reduced": len(stag),
        "staggered_anticorrelated_fraction": anti_stag,
        "left_first_anticorrelated": float(np.mean([r[3] != r[4] for r in left_first])) if left_first else math.nan,
        "right_first_anticorrelated": float(np.mean([r[3] != r[4] for r in right_first])) if right_first else math.nan,
        "left_first": len(left_first),
        "right_first": len(right_first),
    }
    res.check("correlation", prod, f"-1 within {3 * sig_c:.3g}", n > 0 and abs(prod + 1) <= 3 * sig_c)
    res.check("marginal left-A", marg_l, f"{p0} +- {3 * sig_m:.4g}", n > 0 and abs(marg_l - p0) <= 3 * sig_m)
    res.check("marginal right-B", marg_r, f"{p0} +- {3 * sig_m:.4g}", n > 0 and abs(marg_r - p0) <= 3 * sig_m)
    res.check("staggered hits: anticorrelated", anti_stag, f"1 within {3 * sig_s:.3g}", bool(stag) and abs(1 - anti_stag) <= 3 * sig_s)
    return res


# ---------------------------------------------------------------- sprinkling invariance


def boost(points: np.ndarray, rapidity: float) -> np.ndarray:
    """Lorentz boost of ``(t, x)`` rows (light speed 1)."""
    c, s = math.cosh(rapidity), math.sinh(rapidity)
    t, x = points[:, 0], points[:, 1]
    return np.column_stack([c * t + s * x, s * t + c * x])


def boosted_square(side: float, rapidity: float) -> tuple[Region, Callable[[np.ndarray], np.ndarray]]:
    """Bounding box of the boosted square ``[0, side]^2`` and a membership test for its image."""
    corners = boost(np.array([[0, 0], [side, 0], [0, side], [side, side]], dtype=float), rapidity)
    box = Region(corners[:, 0].min(), corners[:, 0].max(), corners[:, 1].min(), corners[:, 1].max())

    def inside(points: np.ndarray) -> np.ndarray:
        back = boost(points, -rapidity)
        return (back[:, 0] >= 0) & (back[:, 0] < side) & (back[:, 1] >= 0) & (back[:, 1] < side)

    return box, inside


def biased_sprinkle(region: Region, density: float, bias: float, rng) -> np.ndarray:
    """Negative control: right count on average, but x drawn from ``1 + bias (2u - 1)^2``."""
    n = rng.poisson(density * region.area)
    t = rng.uniform(region.t0, region.t1, size=n)
    u = np.empty(0)
    while u.size < n:
        cand = rng.random(2 * (n - u.size) + 8)
        keep = rng.random(cand.size) * (1 + bias) < 1 + bias * (2 * cand - 1) ** 2
        u = np.concatenate([u, cand[keep]])
    x = region.x0 + (region.x1 - region.x0) * u[:n]
    return np.column_stack([t, x])


def poisson_chi2(counts: np.ndarray, mean: float) -> tuple[float, float, int]:
    """Chi-square of observed counts against Poisson(mean); bins pooled to expected >= 5."""
    n = counts.size
    k_max = int(max(counts.max(), stats.poisson.isf(1e-9, mean)))
    probs = stats.poisson.pmf(np.arange(k_max + 1), mean)
    probs[-1] += stats.poisson.sf(k_max, mean)
    observed = np.bincount(np.minimum(counts, k_max), minlength=k_max + 1).astype(float)
    exp_bins, obs_bins = [], []
    acc_e = acc_o = 0.0
    for e, o in zip(probs * n, observed):
        acc_e += e
        acc_o += o
        if acc_e >= 5:
            exp_bins.append(acc_e)
            obs_bins.append(acc_o)
            acc_e = acc_o = 0.0
    if acc_e > 0 and exp_bins:
        exp_bins[-1] += acc_e
        obs_bins[-1] += acc_o
    stat, p = stats.chisquare(obs_bins, exp_bins)
    return float(stat), float(p), len(exp_bins) - 1


def _sprinkle_trial(cfg: dict, index: int) -> tuple:
    side, mu = cfg["side"], cfg["mu"]
    counts = []
    for i, eta in enumerate(cfg["rapidities"]):
        box, inside = boosted_square(side, eta)
        rng = rng_stream(cfg["master_seed"], STREAM["sprinkling_invariance"], i, index)
        counts.append(int(inside(sprinkle(box, mu, rng).points).sum()))
    box, inside = boosted_square(side, cfg["control_rapidity"])
    rng = rng_stream(cfg["master_seed"], STREAM["sprinkling_invariance"], len(cfg["rapidities"]), index)
    counts.append(int(inside(biased_sprinkle(box, mu, cfg["control_bias"], rng)).sum()))
    return (index, *counts)


def exp_sprinkling_invariance(cfg: dict) -> ExperimentResult:
    """Counts in boosted equal-area regions against Poisson(mu * area)."""
    rows = parallel_map(functools.partial(_sprinkle_trial, cfg), range(cfg["trials"]), cfg["workers"])
    names = [f"count_eta_{eta:g}" for eta in cfg["rapidities"]] + ["count_control"]
    res = _result("sprinkling_invariance", cfg, ["draw", *names], rows)
    mean = cfg["mu"] * cfg["side"] ** 2
    data = np.array([row[1:] for row in rows], dtype=int)
    tests = []
    for k, eta in enumerate(cfg["rapidities"]):
        stat, p, dof = poisson_chi2(data[:, k], mean)
        tests.append({"rapidity": eta, "mean_count": float(data[:, k].mean()), "chi2": stat, "dof": dof, "p_value": p})
        res.check(f"rapidity {eta:g}: p-value", p, f"> {cfg['alpha']}", p > cfg["alpha"])
    stat, p, dof = poisson_chi2(data[:, -1], mean)
    control = {"rapidity": cfg["control_rapidity"], "bias": cfg["control_bias"], "mean_count": float(data[:, -1].mean()), "chi2": stat, "dof": dof, "p_value": p}
    res.check("biased sprinkler control: p-value", p, f"< {cfg['alpha']}", p < cfg["alpha"])
    res.summary = {"expected_mean": mean, "tests": tests, "control": control}
    return res


REGISTRY: dict[str, Callable[[dict], ExperimentResult]] = {
    "born": exp_born,
    "martingale": exp_martingale,
    "scaling": exp_scaling,
    "path_independence": exp_path_independence,
    "epr": exp_epr,
    "sprinkling_invariance": exp_sprinkling_invariance,
}


def run_experiment(name: str, config: dict | None = None, seed: int | None = None, trials: int | None = None, workers: int | None = None) -> ExperimentResult:
    """Resolve ``config`` against the schema and defaults, apply overrides, run."""
    if name not in REGISTRY:
        raise ConfigurationError(f"unknown experiment '{name}' (choose from {', '.join(cfgmod.EXPERIMENTS)})")
    raw = dict(config or {})
    for key, val in (("master_seed", seed), ("trials", trials), ("workers", workers)):
        if val is not None:
            raw[key] = val
    return REGISTRY[name](cfgmod.resolve(name, raw))
