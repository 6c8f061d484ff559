import json
import subprocess
import sys

import pytest

from polysymp import cli


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def run(tmp_path, kind, config, *extra):
    out = str(tmp_path / "out" / kind)
    code = cli.main([kind, "--config", write(tmp_path, f"{kind}.json", config), "--out", out, *extra])
    report = None
    try:
        with open(out + ".json") as fh:
            report = json.load(fh)
    except FileNotFoundError:
        pass
    return code, report, out


def test_decompose_counterexample(tmp_path):
    cfg = {"multivector": {"dim": 4, "terms": [[[1, 2], 1.0], [[3, 4], 1.0]]}, "expect": False}
    code, rep, _ = run(tmp_path, "decompose", cfg)
    assert code == 0
    assert rep["schema"] == 1
    assert rep["decomposable"] is False and rep["annihilator_dim"] == 0


def test_decompose_expectation_mismatch_exit_1(tmp_path):
    cfg = {"multivector": {"dim": 4, "terms": [[[1, 2], 1.0], [[3, 4], 1.0]]}, "expect": True}
    assert run(tmp_path, "decompose", cfg)[0] == 1


def test_decompose_from_vectors(tmp_path):
    code, rep, _ = run(tmp_path, "decompose", {"vectors": [[1, 0, 2], [0, 1, 1]], "expect": True})
    assert code == 0 and rep["annihilator_dim"] == 2


def test_verify_hamvec_seed7(tmp_path):
    code, rep, _ = run(tmp_path, "verify-hamvec", {"shape": [2, 1], "seed": 7, "points": 100})
    assert code == 0
    assert rep["summary"] == {"total": 100, "passed": 100}


def test_run_kg_order_and_csv(tmp_path):
    code, rep, out = run(tmp_path, "run-kg", {"grid": {"resolutions": [64, 128]}})
    assert code == 0
    assert rep["convergence_order"] >= 1.9
    with open(out + "_nx64.csv") as fh:
        assert fh.readline().strip() == "t,x,phi,pi_t,pi_x,energy"


@pytest.mark.parametrize("kind,cfg", [
    ("prop2", {"grid": {"resolutions": [64, 128]}}),
    ("check-hj", {"grid": {"resolutions": [32, 64]}}),
    ("no-go", {"potentials": 10, "seed": 3}),
])
def test_other_kinds_pass(tmp_path, kind, cfg):
    code, rep, _ = run(tmp_path, kind, cfg)
    assert code == 0
    assert rep["summary"]["passed"] == rep["summary"]["total"] > 0


def test_byte_stable_reports_and_threads(tmp_path, monkeypatch):
    cfg = {"shape": [3, 1], "seed": 5, "points": 20}
    _, _, out1 = run(tmp_path, "verify-hamvec", cfg)
    first = open(out1 + ".json", "rb").read()
    monkeypatch.setenv("POLYSYMP_THREADS", "4")
    _, _, out2 = run(tmp_path, "verify-hamvec", cfg)
    assert open(out2 + ".json", "rb").read() == first


def test_seed_override(tmp_path):
    _, rep, _ = run(tmp_path, "no-go", {"potentials": 2, "seed": 1}, "--seed", "9")
    assert rep["config"]["seed"] == 9


@pytest.mark.parametrize("cfg", [
    "{not json",
    {"kind": "prop2"},
    {"shape": [0, 1]},
    {"tolerances": {"residual": -1.0}},
    {"seed": "abc"},
])
def test_config_errors_exit_2(tmp_path, cfg):
    assert run(tmp_path, "verify-hamvec", cfg)[0] == 2


def test_missing_config_exit_2(tmp_path):
    assert cli.main(["decompose", "--config", str(tmp_path / "nope.json")]) == 2


def test_bad_multivector_exit_2(tmp_path):
    assert run(tmp_path, "decompose", {"multivector": {"dim": 3, "terms": [[[1, 5], 1.0]]}})[0] == 2


def test_internal_error_exit_3(tmp_path, monkeypatch):
    def boom(cfg):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "run_no_go", boom)
    assert run(tmp_path, "no-go", {})[0] == 3


def test_console_entry_point(tmp_path):
    path = write(tmp_path, "d.json", {"multivector": {"dim": 3, "terms": [[[1, 2], 1.0]]}, "expect": True})
    proc = subprocess.run(
        [sys.executable, "-m", "polysymp.cli", "decompose", "--config", path, "--out", str(tmp_path / "r")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "1/1 passed" in proc.stderr
