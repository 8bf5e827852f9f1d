import io
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from pcat.cli import run

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("PCAT_REGEN_GOLDEN") == "1"

GOLDEN_CASES = {
    "spectrum": ["spectrum", "diag12.json"],
    "qmetric": ["qmetric", "diag12.json"],
    "weak_value": ["weak-value", "diag12.json", "diag57.json", "--T", "1"],
    "periodic": ["periodic", "diag12.json", "diag57.json", "--tp", repr(2 * math.pi)],
    "solve_period": ["solve-period", "diag12.json", "--max-candidates", "4"],
    "scan": ["scan", "diag12.json", "--grid", "11"],
    "scan_csv": ["scan", "diag12.json", "--grid", "11", "--output", "csv"],
    "verify": ["verify", "diag12.json", "diag57.json"],
    "spectrum_csv": ["spectrum", "diag12.json", "--output", "csv"],
}


def invoke(args):
    argv = [str(DATA / a) if a.endswith(".json") else a for a in args]
    out = io.StringIO()
    code = run(argv, out)
    return code, out.getvalue()


def close(a, b, path="$"):
    if isinstance(a, dict):
        assert isinstance(b, dict) and a.keys() == b.keys(), path
        for k in a:
            close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            close(x, y, f"{path}[{i}]")
    elif isinstance(a, float) or isinstance(b, float):
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12), path
    else:
        assert a == b, path


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_golden(name):
    code, text = invoke(GOLDEN_CASES[name])
    assert code == 0
    suffix = ".csv" if "csv" in name else ".json"
    path = GOLDEN / (name + suffix)
    if REGEN:
        path.write_text(text)
    expected = path.read_text()
    if suffix == ".json":
        got, want = json.loads(text), json.loads(expected)
        # paths in the echo are machine-specific; only the label is kept
        close(want, got)
    else:
        rows_got = [r.split(",") for r in text.strip().splitlines()]
        rows_want = [r.split(",") for r in expected.strip().splitlines()]
        assert rows_got[0] == rows_want[0]
        assert len(rows_got) == len(rows_want)
        for g, w in zip(rows_got[1:], rows_want[1:]):
            assert g[0] == w[0]
            for x, y in zip(g[1:], w[1:]):
                try:
                    assert float(x) == pytest.approx(float(y), rel=1e-9, abs=1e-12)
                except ValueError:
                    assert x == y


def result(args):
    code, text = invoke(args)
    assert code == 0
    return json.loads(text)["result"]


def test_spectrum_contents():
    r = result(["spectrum", "diag12.json"])
    assert [e["re"] for e in r["eigenvalues"]] == [1.0, 2.0]
    assert r["B_max"] == 0.0 and r["subset_size"] == 2


def test_spectrum_non_normal_cond(tmp_path):
    p = tmp_path / "u.json"
    p.write_text(json.dumps({"n": 2, "re": [[1, 1], [0, 2]], "im": [[0, 0], [0, 0]]}))
    out = io.StringIO()
    assert run(["spectrum", str(p)], out) == 0
    assert json.loads(out.getvalue())["result"]["cond_P"] > 1


def test_periodic_contents():
    r = result(["periodic", "diag12.json", "id2.json", "--tp", "1.234"])
    assert r["exact_value"]["re"] == pytest.approx(1.0, abs=1e-15) and abs(r["exact_value"]["im"]) <= 1e-15
    r = result(["periodic", "diag12.json", "diag57.json", "--tp", repr(2 * math.pi)])
    assert r["exact_value"]["re"] == pytest.approx(6.0) and r["exact_im_ratio"] <= 1e-9
    assert r["theorem3_prerequisites"]["holds"]


def test_solve_period_contents():
    r = result(["solve-period", "diag12.json"])
    assert r["selected"]["t_p"] == pytest.approx(2 * math.pi) and r["selected"]["m"] == [1, 2]
    assert r["degenerate"] and r["verified"]
    r = result(["solve-period", "diag123.json"])
    assert r["selected"]["t_p"] == pytest.approx(2 * math.pi) and r["selected"]["m"] == [1, 2, 3]


def test_scan_contents():
    r = result(["scan", "diag12.json", "--t-max", "10", "--grid", "1000"])
    assert len(r["rows"]) == 1000
    assert r["argmax_t"] == pytest.approx(6.283, abs=1e-3)
    assert list(r["rows"][0]) == ["t_p", "f", "damped_f"]
    r = result(["scan", "diag12.json", "--grid", "2"])
    assert len(r["rows"]) == 2


def test_scan_csv_digits():
    code, text = invoke(["scan", "diag12.json", "--grid", "7", "--output", "csv"])
    lines = text.strip().splitlines()
    assert lines[0] == "t_p,f,damped_f" and len(lines) == 8
    t = lines[3].split(",")[0]
    assert len(t.replace(".", "").lstrip("0")) >= 12


def test_weak_value_contents():
    r = result(["weak-value", "cplx3.json", "id3.json", "--T", "1"])
    assert r["amplitude_modulus"] == pytest.approx(math.exp(0.3), rel=1e-12)
    assert r["weak_value"]["re"] == pytest.approx(1.0) and abs(r["weak_value"]["im"]) < 1e-12
    r = result(["weak-value", "diag12.json", "diag57.json", "--T", "2"])
    assert r["im_ratio"] <= 1e-12


def test_q_hermitize_flag(tmp_path):
    p = tmp_path / "o.json"
    p.write_text(json.dumps({"n": 2, "re": [[1, 2], [0, 1]], "im": [[0, 0], [0, 0]]}))
    r = result(["weak-value", str(DATA / "diag12.json"), str(p), "--T", "1", "--q-hermitize"])
    assert r["im_ratio"] <= 1e-12


def test_verify_all_pass():
    assert result(["verify", "diag123.json"])["all_pass"]
    assert result(["verify", "cplx3.json"])["all_pass"]


@pytest.mark.parametrize("args,code,error", [
    (["spectrum", "missing.json"], 2, "ParseError"),
    (["spectrum", "jordan.json"], 3, "NonDiagonalizable"),
    (["solve-period", "posB.json"], 3, "PositiveBmax"),
    (["periodic", "diag12.json", "id2.json", "--tp", repr(math.pi)], 3, "VanishingTrace"),
    (["solve-period", "flat.json"], 3, "EmptyWithinBounds"),
    (["periodic", "diag12.json", "id3.json", "--tp", "1"], 2, "DimensionMismatch"),
    (["weak-value", "diag12.json", "id2.json", "--T", "-1"], 2, "TimeOutOfRange"),
    (["spectrum", "diag12.json", "--hbar", "0"], 2, "InputError"),
])
def test_exit_code_matrix(args, code, error):
    got, text = invoke(args)
    assert got == code
    doc = json.loads(text)
    assert doc["error"] == error and doc["exit_code"] == code
    assert "config" in doc


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        run(["no-such-command"], io.StringIO())
    assert exc.value.code == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pcat", "spectrum", str(DATA / "jordan.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 3
    assert json.loads(proc.stdout)["error"] == "NonDiagonalizable"
