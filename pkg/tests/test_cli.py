import subprocess
import sys
from pathlib import Path

import pytest

from godeconj.cli import main, run
from godeconj.config import load, parse_matrix, parse_timed
from godeconj.errors import ConfigError
from godeconj.reports import read_record, sha256

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

EXPECTED = {
    "scalar_forced": 0,
    "zero_perturbation": 0,
    "hyperbolic_2d": 0,
    "impulsive": 0,
    "measure_staircase": 0,
    "gate_failure": 2,
    "malformed": 1,
    "holder": 0,
}


def manifest(out: Path) -> dict:
    lines = (out / "manifest.txt").read_text().splitlines()
    head = dict(line.split(" = ", 1) for line in lines if " = " in line)
    files = dict(reversed(line.split("  ", 1)) for line in lines if "  " in line)
    return {"head": head, "files": files}


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_exit_code_contract(name, tmp_path):
    out = tmp_path / "out"
    code = run(SCENARIOS / f"{name}.ini", out)
    assert code == EXPECTED[name]
    if code == 1:
        assert not out.exists()
        return
    m = manifest(out)
    assert m["head"]["exit_code"] == str(code)
    for fname, digest in m["files"].items():
        assert sha256(out / fname) == digest


def test_gate_failure_report(tmp_path):
    assert run(SCENARIOS / "gate_failure.ini", tmp_path) == 2
    gate = read_record(tmp_path / "gate.txt")
    assert float(gate["delta"]) == pytest.approx(1.22513221539126, abs=1e-12)
    assert gate["pass"] == "false"
    assert manifest(tmp_path)["head"]["status"].startswith("gate_failed")


def test_zero_perturbation_identity_artifacts(tmp_path):
    assert run(SCENARIOS / "zero_perturbation.ini", tmp_path) == 0
    conj = read_record(tmp_path / "conjugate.txt")
    assert float(conj["phi_sup"]) == 0.0 and float(conj["psi_sup"]) == 0.0
    ver = read_record(tmp_path / "verify.txt")
    assert float(ver["identity_sup_psi_phi"]) == 0.0 and ver["pass"] == "true"


def test_determinism_across_runs_and_threads(tmp_path):
    cfg = SCENARIOS / "hyperbolic_2d.ini"
    outs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    assert run(cfg, outs[0], seed=7) == 0
    assert run(cfg, outs[1], seed=7) == 0
    assert run(cfg, outs[2], seed=7, threads=3) == 0
    ref = (outs[0] / "manifest.txt").read_bytes()
    assert (outs[1] / "manifest.txt").read_bytes() == ref
    assert (outs[2] / "manifest.txt").read_bytes() == ref


def test_csv_number_format(tmp_path):
    assert run(SCENARIOS / "scalar_forced.ini", tmp_path) == 0
    rows = (tmp_path / "bounded.csv").read_text().splitlines()
    assert rows[0].startswith("t,")
    for row in rows[1:]:
        for value in row.split(","):
            assert value == "%.17g" % float(value)
    assert float(rows[len(rows) // 2].split(",")[1]) == pytest.approx(0.3, abs=1e-4)


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


BASE = """
[scenario]
tasks = flow
[system]
type = gode
window = 0, 4
A = -1
[nonlinearity]
kind = tanh
eps = 0.5
[solver]
step = 0.01
tol = 1e-14
max_iter = {max_iter}
[flow]
t0 = 0
x0 = 1
"""


def test_non_convergence_exit(tmp_path):
    out = tmp_path / "out"
    assert run(write(tmp_path, BASE.format(max_iter=2)), out) == 3
    assert manifest(out)["head"]["status"] == "not_converged"
    assert run(write(tmp_path, BASE.format(max_iter=200)), tmp_path / "ok") == 0


@pytest.mark.parametrize("text", [
    "[scenario]\ntasks = flow\n",
    BASE.format(max_iter=5).replace("tasks = flow", "tasks = holder"),
    BASE.format(max_iter=5).replace("type = gode", "type = pde"),
    BASE.format(max_iter=5).replace("A = -1", "A = -1, 0; 0"),
    BASE.format(max_iter=5).replace("step = 0.01", "step = -1"),
    BASE.format(max_iter=5).replace("x0 = 1", "x0 = 1, 2"),
    BASE.format(max_iter=5).replace("kind = tanh", "kind = cubic"),
])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load(write(tmp_path, text))
    out = tmp_path / "out"
    assert run(write(tmp_path, text), out) == 1
    assert not out.exists()


def test_config_parsers():
    assert parse_matrix("1, 2; 3, 4").tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert parse_matrix("-2").shape == (1, 1)
    with pytest.raises(ConfigError):
        parse_matrix("1, 2; 3")
    items = parse_timed("1.5 | 2\n 0.5 | 1\n", None, scalar=True)
    assert items == [(0.5, 1.0), (1.5, 2.0)]


def test_describe_scalar(capsys):
    assert main(["describe", "--config", str(SCENARIOS / "scalar_forced.ini")]) == 0
    out = dict(line.split(" = ", 1) for line in capsys.readouterr().out.splitlines())
    assert float(out["delta"]) == 0.0
    assert float(out["reference_holder_exponent"]) == 0.5
    assert len(out) == len(set(out))


def test_describe_mde_and_estimate(tmp_path, capsys):
    text = (SCENARIOS / "measure_staircase.ini").read_text().replace("tasks = integrate, flow",
                                                                    "tasks = bounded")
    text += "\n[dichotomy]\nmode = claimed\nP = 1\nK = 1\nalpha = 0.5\n"
    assert main(["describe", "--config", str(write(tmp_path, text, "m.ini"))]) == 0
    out = capsys.readouterr().out
    assert "mde_gate_quantity = " in out
    est = text.replace("mode = claimed", "mode = estimate")
    assert main(["describe", "--config", str(write(tmp_path, est, "e.ini"))]) == 0
    assert "estimated at runtime" in capsys.readouterr().out


def test_describe_malformed():
    assert main(["describe", "--config", str(SCENARIOS / "malformed.ini")]) == 1


def test_console_script_entry(tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run([sys.executable, "-m", "godeconj.cli", "run", "--config",
                           str(SCENARIOS / "gate_failure.ini"), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "gate failure" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "godeconj.cli", "run", "--config", "x.ini",
                           "--out", str(out), "--threads", "0"], capture_output=True, text=True)
    assert proc.returncode != 0
