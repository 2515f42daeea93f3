import json
import os

import numpy as np
import pytest

from classcnet import cli, config, fixtures, verification
from classcnet.netgraph import dump


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_fixture(capsys):
    code, out, _ = run(capsys, "validate", "--graph", "fixture:two_node")
    doc = json.loads(out)
    assert code == 0 and doc["valid"] and doc["schema_version"] == 1


def test_malformed_graph_reports_line(tmp_path, capsys):
    bad = tmp_path / "g.json"
    bad.write_text('{"nodes": [\n  {"id": 0,, }\n]}')
    code, _, err = run(capsys, "validate", "--graph", str(bad))
    assert code == 1
    assert "line 2" in err


def test_stochastic_needs_seed(capsys):
    code, _, err = run(capsys, "mean-green", "--graph", "fixture:single_loop", "--e1", "0", "--e2", "0")
    assert code == 1 and "--seed" in err


def test_bad_z(capsys):
    code, _, _ = run(capsys, "green", "--graph", "fixture:single_loop", "--e1", "0", "--e2", "0",
                     "--seed", "1", "--z", "a,b")
    assert code == 1


def test_trails_ceiling_is_resource_exit(capsys):
    code, _, err = run(capsys, "trails", "--graph", "lattice:6,0.5", "--e", "0", "--ceiling", "10")
    assert code == 4 and "resource" in err


def test_statistics_error_is_numerical_exit(capsys):
    code, _, _ = run(capsys, "lattice", "--mode", "fractal", "--L", "8", "--walks", "20", "--seed", "1")
    assert code == 2


def test_verify_failure_exit(monkeypatch, capsys):
    def failing(rng, scale=1.0):
        return verification.CheckResult("always_fails", 99, False, "forced", {})
    monkeypatch.setattr(verification, "CHECKS", verification.CHECKS + [("always_fails", failing)])
    code, out, _ = run(capsys, "verify", "--seed", "3", "--only", "always_fails")
    assert code == 3
    assert json.loads(out)["passed"] is False


def test_verify_only_subset(capsys):
    code, out, err = run(capsys, "verify", "--seed", "5", "--scale", "0.01",
                         "--only", "signed_jacobi_identity,pairing_sum_equals_minor_squared")
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    assert [c["name"] for c in doc["checks"]] == ["pairing_sum_equals_minor_squared", "signed_jacobi_identity"]
    assert "[PASS]  6 pairing_sum" in err


def test_verify_unknown_check(capsys):
    code, _, _ = run(capsys, "verify", "--seed", "5", "--only", "nope")
    assert code == 1


def test_mean_green_offdiagonal_verdict(capsys):
    g = fixtures.two_node(0.3, 1.1)
    # pick two edges leaving different nodes
    e1 = g.edges[0]
    e2 = next(e for e in g.edges if e.source[0] != e1.source[0])
    code, out, _ = run(capsys, "mean-green", "--graph", "fixture:two_node_generic", "--e1", str(e1.id),
                       "--e2", str(e2.id), "--seed", "9", "--samples", "4000")
    assert code == 0
    assert json.loads(out)["verdict"] == "consistent with zero"


def test_mean_green_diagonal_agrees(capsys):
    code, out, _ = run(capsys, "mean-green", "--graph", "fixture:single_loop", "--e1", "0", "--e2", "0",
                       "--seed", "2", "--samples", "4000", "--z", "0.6,0")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "agree"
    assert doc["classical_trace"][0] == pytest.approx(2 - 0.36)


def test_conductance_two_node_cut(capsys):
    code, out, _ = run(capsys, "conductance", "--graph", "fixture:two_node_cut", "--seed", "4",
                       "--samples", "500")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "agree"
    assert doc["classical"] == pytest.approx(2 * np.cos(1.1) ** 2)


def test_analyze_inline_matrix(capsys):
    code, out, _ = run(capsys, "analyze-s", "--matrix", "[[0.6, 0.8], [-0.8, 0.6]]")
    doc = json.loads(out)
    assert code == 0 and doc["reducible"] and doc["uniform"] == "nonnegative"


def test_outputs_byte_identical(tmp_path, capsys):
    outs = []
    for k, workers in enumerate(("1", "3")):
        d = tmp_path / f"run{k}"
        code, _, _ = run(capsys, "lattice", "--mode", "hull", "--L", "16", "--p", "0.4,0.5",
                         "--walks", "300", "--seed", "17", "--workers", workers, "--out", str(d))
        assert code == 0
        outs.append({name: (d / name).read_bytes() for name in sorted(os.listdir(d))})
    assert set(outs[0]) == {"report.json", "loop_stats.csv"}
    assert outs[0] == outs[1]


def test_dos_csv(tmp_path, capsys):
    code, out, _ = run(capsys, "dos", "--graph", "fixture:two_node", "--seed", "1", "--points", "16",
                       "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "dos.csv").read_text().splitlines()
    assert lines[0] == "eps,rho" and len(lines) == 17
    assert json.loads(out)["states"] == 8


def test_config_paths_and_overrides(tmp_path, monkeypatch, capsys):
    conf_dir = tmp_path / "conf"
    conf_dir.mkdir()
    dump(fixtures.two_node(0.3, 1.1), conf_dir / "graph.json")
    (conf_dir / "run.json").write_text(json.dumps(
        {"graph": "graph.json", "e": 0, "walks": 50, "seed": 1, "out": "results"}))
    elsewhere = tmp_path / "cwd"
    elsewhere.mkdir()
    monkeypatch.chdir(elsewhere)
    code, out, _ = run(capsys, "walk", "--config", str(conf_dir / "run.json"), "--walks", "80")
    assert code == 0
    assert json.loads(out)["walks"] == 80
    # config paths are relative to the config file
    assert (conf_dir / "results" / "report.json").exists()

    code, _, _ = run(capsys, "walk", "--config", str(conf_dir / "run.json"), "--out", "mine")
    assert code == 0
    # flag paths are relative to the working directory
    assert (elsewhere / "mine" / "report.json").exists()


def test_config_wrong_command(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"command": "dos"}))
    code, _, _ = run(capsys, "validate", "--config", str(p), "--graph", "fixture:two_node")
    assert code == 1


def test_tolerances_restored(capsys):
    before = config.TOL
    run(capsys, "analyze-s", "--matrix", "[[1.0]]", "--tolerance-scale", "10")
    assert config.TOL == before


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "classcnet", "analyze-s", "--matrix", "[[0.0, 1.0], [1.0, 0.0]]"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["uniform"] == "nonpositive"
