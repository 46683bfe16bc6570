import json

import pytest

from intervalmfa.cli import EXIT_CONFIG, EXIT_OK, RunConfig, ConfigError, run_command


def write_cfg(tmp_path, d):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return str(p)


def test_tq_csv_rows_and_columns(tmp_path):
    out = tmp_path / "tq.csv"
    assert run_command(["tq", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("q,T")
    assert len(lines) == 42
    assert len({len(l.split(",")) for l in lines}) == 1


def test_spectrum_csv_stable_and_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_command(["spectrum", "dimension", "--out", str(a)]) == EXIT_OK
    assert run_command(["spectrum", "dimension", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().strip().splitlines()
    assert lines[0] == "q,T,alpha,DS,converged,degenerate"
    assert len({len(l.split(",")) for l in lines}) == 1


def test_tower_dot_matches_census(tmp_path):
    cfg = write_cfg(tmp_path, {"map": {"family": "quadratic", "lambda": 3.9}, "tower": {"level_cap": 6}})
    dot = tmp_path / "t.dot"
    assert run_command(["tower", "--config", cfg, "--dot", str(dot), "--out", str(tmp_path / "t.json")]) == EXIT_OK
    rep = json.loads((tmp_path / "t.json").read_text())
    nodes = [l for l in dot.read_text().splitlines() if "label=" in l and "->" not in l]
    assert len(nodes) == sum(rep["census"].values()) == rep["domains"]


def test_pointwise_and_visits_json(tmp_path):
    out = tmp_path / "p.json"
    assert run_command(["pointwise", "--x", "0.0", "--depth", "30", "--sample", "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["d_cylinder"] == pytest.approx(1.736965594166, abs=1e-9)
    assert "sampled" in rep
    out = tmp_path / "v.json"
    assert run_command(["visits", "--delta", "0.1", "--n", "30", "--x", "0.1234", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["tower_visit_frequency"] == 1.0


def test_config_errors(tmp_path):
    assert run_command(["tq", "--config", write_cfg(tmp_path, {"thermo": {"tol": -1}})]) == EXIT_CONFIG
    assert run_command(["tq", "--config", write_cfg(tmp_path, {"bogus": 1})]) == EXIT_CONFIG
    assert run_command(["tq", "--config", write_cfg(tmp_path, {"thermo": {"qmin": 1, "qmax": 0}})]) == EXIT_CONFIG
    assert run_command(["tq", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert run_command(["no-such-command"]) == EXIT_CONFIG


def test_runconfig_roundtrip():
    cfg = RunConfig.from_dict({"scheme": {"type": "B", "delta": 0.3}})
    assert cfg.scheme.type == "B" and cfg.scheme.delta == 0.3
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"scheme": {"type": "C"}})
    assert len(RunConfig().q_grid()) == 41
