import json
import math
import subprocess
import sys

import pytest
import yaml

from halfspace import cli
from halfspace.cli import EXIT_INPUT, EXIT_OK, EXIT_QUADRATURE, EXIT_VERDICT, main
from halfspace.errors import QuadratureError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def measure_files(tmp_path):
    mu = tmp_path / "mu.yaml"
    mu.write_text(yaml.safe_dump({"dim": 2, "side": "interior", "atoms": [{"loc": [0, 1], "w": 1}]}))
    nu = tmp_path / "nu.yaml"
    nu.write_text(yaml.safe_dump({"dim": 2, "side": "boundary", "density": {"name": "gauss"}}))
    return str(mu), str(nu)


# -- kernel --------------------------------------------------------------------------


def test_kernel_green(capsys):
    code, out, _ = run(capsys, "kernel", "--dim", "2", "--x", "0,1", "--y", "0,2", "--which", "green")
    assert code == EXIT_OK
    assert float(out) == pytest.approx(math.log(3) / (2 * math.pi), rel=1e-14)


def test_kernel_poisson(capsys):
    code, out, _ = run(capsys, "kernel", "--dim", "3", "--x", "0,0,1", "--yprime", "0,0", "--which", "poisson")
    assert code == EXIT_OK
    assert float(out) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


@pytest.mark.parametrize(
    "argv",
    [
        ["kernel", "--dim", "2", "--x", "0,1", "--y", "0,1", "--which", "green"],
        ["kernel", "--dim", "2", "--x", "0,1,2", "--y", "0,1"],
        ["kernel", "--dim", "2", "--x", "0,-1", "--y", "0,1"],
        ["kernel", "--dim", "2", "--x", "0,1", "--y", "0,-1"],
        ["kernel", "--dim", "2", "--x", "0,0", "--yprime", "0", "--which", "poisson"],
        ["kernel", "--dim", "1", "--x", "1", "--y", "2"],
        ["kernel", "--dim", "2", "--x", "a,b", "--y", "0,1"],
        ["kernel", "--which", "nope"],
        ["no-such-command"],
    ],
)
def test_kernel_bad_input(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == EXIT_INPUT
    assert out == ""


def test_kernel_json(capsys):
    code, out, _ = run(capsys, "kernel", "--x", "0,1", "--y", "0,2", "--format", "json")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert isinstance(doc, dict)


# -- field commands -----------------------------------------------------------------------


def test_represent_from_measure_files(capsys, measure_files):
    mu, nu = measure_files
    code, out, _ = run(capsys, "represent", "--measure", mu, "--measure", nu, "--h", "0.3", "--x", "0,2", "--quiet")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert len(lines) == 2
    value = float(lines[1].split(",")[-1])
    assert value > 0.3 * 2


def test_ring_scan_linear(capsys):
    code, out, _ = run(capsys, "ring_scan", "--corpus", "linear", "--condition", "r-plus", "--h", "1", "--quiet")
    assert code == EXIT_OK
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert rows and all(float(r[2]) == 0.0 for r in rows)


def test_ring_scan_verdict_failure(capsys):
    # u = 1 does not satisfy the classical ring condition
    code, _, _ = run(capsys, "ring-scan", "--corpus", "constant", "--condition", "r", "--quiet")
    assert code == EXIT_VERDICT


def test_ring_scan_unknown_condition(capsys):
    code, _, _ = run(capsys, "ring-scan", "--corpus", "constant", "--condition", "q")
    assert code == EXIT_INPUT


def test_weak_residual_measure_files(capsys, measure_files):
    mu, nu = measure_files
    code, out, _ = run(capsys, "weak-residual", "--measure", mu, "--measure", nu, "--h", "0.3", "--quiet")
    assert code == EXIT_OK
    assert out.splitlines()[0].startswith("test,")


def test_trace_scan(capsys):
    code, out, _ = run(capsys, "trace-scan", "--corpus", "remark_v_plus", "--target", "1", "--expect", "converges",
                       "--quiet")
    assert code == EXIT_OK
    code, _, _ = run(capsys, "trace-scan", "--corpus", "remark_u_plus", "--expect", "converges", "--quiet")
    assert code == EXIT_VERDICT


def test_huber_check(capsys):
    code, out, _ = run(capsys, "huber-check", "--corpus", "green_delta_ref", "--probes", "5", "--quiet")
    assert code == EXIT_OK
    assert out.count("\n") >= 2


def test_estimates_audit_reports_gradient_lower_bound(capsys):
    code, out, _ = run(capsys, "estimates_audit", "--dim", "4", "--samples", "200", "--seed", "7", "--quiet")
    rows = {r.split(",")[1]: r.split(",") for r in out.splitlines()[1:]}
    assert code == EXIT_VERDICT
    assert int(rows["grad_sq_lower"][2]) > 0
    assert all(int(r[2]) == 0 for k, r in rows.items() if k != "grad_sq_lower")


def test_corpus_run_subset(capsys):
    code, out, err = run(capsys, "corpus-run", "--entry", "linear", "--suite", "ring")
    assert code == EXIT_OK
    assert "ok   linear ring" in err
    assert len(out.splitlines()) == 3


def test_corpus_run_unknown_entry(capsys):
    code, out, _ = run(capsys, "corpus-run", "--entry", "nope")
    assert code == EXIT_INPUT and out == ""


def test_nonpositive_tolerance_is_input_error(capsys):
    code, out, _ = run(capsys, "represent", "--field", "x2", "--x", "0,1", "--tol", "0")
    assert code == EXIT_INPUT and out == ""


def test_quadrature_failure_exit_code(capsys, monkeypatch, tmp_path):
    def fail(args, dim, q):
        raise QuadratureError("budget exhausted")

    monkeypatch.setitem(cli.COMMANDS, "kernel", fail)
    p = tmp_path / "r.csv"
    code, out, err = run(capsys, "kernel", "--x", "0,1", "--y", "0,2", "--out", str(p))
    assert code == EXIT_QUADRATURE
    assert out == "" and "quadrature" in err
    assert not p.exists()


# -- reports ---------------------------------------------------------------------------------


def test_reports_are_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["corpus-run", "--entry", "constant", "--suite", "ring", "--seed", "3", "--out", str(p), "--quiet"]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    capsys.readouterr()


def test_json_report(tmp_path):
    p = tmp_path / "r.json"
    assert main(["corpus-run", "--entry", "linear", "--suite", "harmonic", "--format", "json", "--out", str(p),
                 "--quiet"]) == 0
    doc = json.loads(p.read_text())
    assert doc["ok"] is True and doc["rows"][0]["entry"] == "linear"


def test_no_report_on_input_error(tmp_path):
    p = tmp_path / "r.csv"
    assert main(["ring-scan", "--corpus", "nope", "--out", str(p), "--quiet"]) == EXIT_INPUT
    assert not p.exists()


def test_atomic_write_leaves_no_temporaries(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("old")
    assert main(["kernel", "--x", "0,1", "--y", "0,2", "--out", str(p)]) == 0
    assert p.read_text() != "old"
    assert sorted(f.name for f in tmp_path.iterdir()) == ["r.csv"]


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "halfspace.cli", "kernel", "--x", "0,1", "--y", "0,2"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert float(res.stdout) == pytest.approx(0.1748495762830299, rel=1e-14)
