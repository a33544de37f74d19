import csv
import json

import pytest

from collapsesim import cli, config as cfgmod
from collapsesim.errors import ConfigurationError


def _write(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(body if isinstance(body, str) else json.dumps(body))
    return str(path)


def test_list_prints_six_experiments(capsys):
    assert cli.main(["run", "--list"]) == 0
    assert capsys.readouterr().out.split() == list(cfgmod.EXPERIMENTS)


def test_validate_ok(tmp_path, capsys):
    path = _write(tmp_path, "ok.json", {"experiment": "born", "model": "grw", "r": 0.5})
    assert cli.main(["validate", path]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_missing_r_exits_1_naming_key(tmp_path, capsys):
    path = _write(tmp_path, "nor.json", {"experiment": "born", "model": "grw", "trials": 5})
    assert cli.main(["run", "--config", path]) == 1
    assert "missing required key 'r'" in capsys.readouterr().err


def test_negative_mu_names_constraint(tmp_path, capsys):
    path = _write(tmp_path, "mu.json", {"experiment": "born", "r": 1, "model": "rel", "rel": {"mu": -1}})
    assert cli.main(["validate", path]) == 1
    assert "rel.mu >= 0" in capsys.readouterr().err


def test_unknown_keys_rejected_at_every_level(tmp_path):
    for body in ({"experiment": "epr", "r": 1, "colour": 1}, {"experiment": "born", "r": 1, "grw": {"spin": 1}}):
        ok, errors = cli.validate(_write(tmp_path, "u.json", body))
        assert not ok and "unknown key" in errors[0]


def test_parse_error_reports_line_and_column(tmp_path, capsys):
    path = _write(tmp_path, "bad.json", '{"experiment": "born",\n  "r": 1,\n  "model" "grw"}')
    assert cli.main(["validate", path]) == 1
    assert "line 3, column 11" in capsys.readouterr().err


def test_exact_tier_over_cap_reports_dimension(tmp_path, capsys):
    rel = {"tier": "exact", "n_max": 6, "n_t": 10, "n_x": 12, "branches": [{"columns": [0, 1, 2, 3, 4]}, {"columns": [6, 7, 8, 9, 10]}]}
    path = _write(tmp_path, "dim.json", {"experiment": "born", "r": 1, "model": "rel", "rel": rel})
    assert cli.main(["validate", path]) == 1
    # two branches, ten excitable modes in one row, seven levels each
    assert f"computed dimension {2 * 7**10}" in capsys.readouterr().err


def test_path_independence_cap(tmp_path):
    body = {"experiment": "path_independence", "r": 1, "dim_cap": 1000}
    ok, errors = cli.validate(_write(tmp_path, "p.json", body))
    assert not ok and "computed dimension" in errors[0]


def test_weights_must_sum_to_one():
    with pytest.raises(ConfigurationError, match="sum\\(weights\\)"):
        cfgmod.resolve("born", {"r": 1, "weights": [0.5, 0.6]})


def test_experiment_mismatch_rejected():
    with pytest.raises(ConfigurationError):
        cfgmod.resolve("born", {"experiment": "epr", "r": 1})


def test_no_experiment_is_an_error(tmp_path, capsys):
    path = _write(tmp_path, "x.json", {"r": 1})
    assert cli.main(["run", "--config", path]) == 1
    assert "no experiment given" in capsys.readouterr().err


def test_run_writes_outputs_with_header(tmp_path, capsys):
    path = _write(tmp_path, "born.json", {"experiment": "born", "model": "rel", "r": 1.0, "trials": 30})
    out = tmp_path / "out"
    code = cli.main(["run", "--config", path, "--seed", "42", "--out-dir", str(out)])
    assert code in (0, 2)
    assert "frequency_1" in capsys.readouterr().out
    lines = (out / "born.csv").read_text().splitlines()
    digest = cfgmod.digest(cfgmod.resolve("born", {"experiment": "born", "model": "rel", "r": 1.0, "trials": 30, "master_seed": 42}))
    assert lines[0] == "# experiment: born"
    assert lines[1] == f"# config_digest: {digest}"
    assert lines[2] == "# master_seed: 42"
    rows = list(csv.reader(lines[3:]))
    assert rows[0] == ["trial", "outcome", "final_weight_1", "n_hits"]
    assert len(rows) == 31
    data = json.loads((out / "born.json").read_text())
    assert data["config_digest"] == digest and data["master_seed"] == 42
    assert {"summary", "criteria", "passed"} <= set(data)


def test_failed_criterion_exits_2(tmp_path):
    # far too few hits to reduce anything, so the frequency check cannot pass
    body = {"experiment": "born", "model": "rel", "r": 1.0, "trials": 20, "rel": {"mu": 0.0}}
    assert cli.main(["run", "--config", _write(tmp_path, "b.json", body), "--out-dir", str(tmp_path / "o")]) == 2


def test_csv_reals_round_trip(tmp_path):
    path = _write(tmp_path, "s.json", {"experiment": "scaling", "r": 3.0, "trials": 3, "points": 5})
    out = tmp_path / "o"
    cli.main(["run", "--config", path, "--out-dir", str(out)])
    rows = list(csv.reader((out / "scaling.csv").read_text().splitlines()[4:]))
    values = [float(r[1]) for r in rows]
    assert all("%.17g" % v == r[1] for v, r in zip(values, rows))


def test_digest_ignores_run_only_keys():
    a = cfgmod.resolve("epr", {"r": 1.0})
    b = dict(a, workers=4, out_dir="elsewhere")
    assert cfgmod.digest(a) == cfgmod.digest(b)
    assert cfgmod.digest(a) != cfgmod.digest(dict(a, r=2.0))


def test_shipped_configs_validate():
    from pathlib import Path

    for path in sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json")):
        ok, errors = cli.validate(str(path))
        assert ok, (path.name, errors)
