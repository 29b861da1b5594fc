import json
import math
import subprocess
import sys

import pytest

from conftest import DIM_MIDDLE_FIFTH, LAMBDA_MIDDLE_FIFTH
from lyapkernel.cli import run


def _run(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _json(capsys, *argv):
    code, out, err = _run(capsys, *argv)
    return code, (json.loads(out) if out.strip() else None), err


@pytest.fixture
def fam_file(tmp_path):
    p = tmp_path / "fam.json"
    p.write_text(json.dumps({"mode": "matrices", "matrices": [[[2, 1], [1, 2]]]}))
    return p


def test_cantor_dim_golden(capsys):
    code, rep, _ = _json(capsys, "cantor-dim", "--b", "5", "--d1", "0,1,3,4", "--d2", "0,1,3,4", "--eps", "1e-10")
    assert code == 0 and rep["schema"] == 1 and rep["status"] == "Certified"
    assert rep["dimension"] == pytest.approx(DIM_MIDDLE_FIFTH, abs=1e-10 / math.log(5))
    assert rep["lyapunov"] == pytest.approx(LAMBDA_MIDDLE_FIFTH, abs=1e-9)
    assert rep["pipeline"] == "Conjugated" and rep["P"] is not None
    assert rep["bound"] < 1e-10 and rep["timing_s"] >= 0


def test_census_golden(capsys):
    code, out, _ = _run(capsys, "census", "--b", "4", "--threads", "1")
    assert code == 0
    assert out.splitlines() == ["b,all_pairs,degenerate,degenerate_pct,no_ghc,no_ghc_pct", "4,196,190,96.94,0,0.00"]


def test_census_several_bases_and_detail(capsys, tmp_path):
    detail = tmp_path / "detail.txt"
    code, out, _ = _run(capsys, "census", "--b", "4,5", "--threads", "1", "--detail", str(detail))
    assert code == 0 and out.splitlines()[2] == "5,900,882,98.00,7,38.89"
    lines = detail.read_text().splitlines()
    assert len(lines) == 196 + 900
    assert "5 0,1,3,4 0,1,3,4 OK" in lines


def test_census_guard(capsys):
    code, _, err = _run(capsys, "census", "--b", "8")
    assert code == 1 and "--slow" in err
    code, _, err = _run(capsys, "census", "--b", "12", "--slow")
    assert code == 1 and "--allow-large" in err


def test_lyapunov_golden(capsys, fam_file):
    code, rep, _ = _json(capsys, "lyapunov", "--file", str(fam_file), "--eps", "1e-6")
    assert code == 0 and rep["status"] == "Positive"
    assert rep["estimate"] == pytest.approx(math.log(3), abs=1e-6)
    assert rep["bound"] < 1e-6 and rep["P"] is None and rep["witness"] is None


def test_replay_is_bitwise(capsys, tmp_path, middle_fifth):
    src = tmp_path / "m5.txt"
    src.write_text("# middle fifth\n4 0 2 1\n2 1 1 2\n1 2 2 1\n2 1 1 2\n1 2 0 4\n")
    code, first, _ = _json(capsys, "lyapunov", "--file", str(src), "--eps", "1e-8")
    assert code == 0 and first["status"] == "Conjugated"
    report = tmp_path / "report.json"
    report.write_text(json.dumps(first))
    code, again, _ = _json(capsys, "lyapunov", "--replay", str(report))
    assert code == 0
    for k in ("estimate", "N", "M", "r", "bound"):
        assert again[k] == first[k]
    assert again["estimate"].hex() == first["estimate"].hex()


def test_ghc_exit_code(capsys, tmp_path):
    p = tmp_path / "m3.txt"
    p.write_text("2 0 0 1\n0 1 1 0\n1 0 0 2\n")
    code, rep, _ = _json(capsys, "lyapunov", "--file", str(p))
    assert code == 2 and rep["status"] == "GhcDetected"
    assert rep["witness"]["tag"] == "involution" and "estimate" not in rep
    code, rep, _ = _json(capsys, "check-positivize", "--file", str(p))
    assert code == 2 and rep["status"] == "GhcDetected"
    code, rep, _ = _json(capsys, "cantor-dim", "--b", "3", "--d1", "0,2", "--d2", "0,2")
    assert code == 2 and rep["status"] == "GhcDetected"


def test_degenerate_exit_code(capsys):
    code, rep, _ = _json(capsys, "cantor-dim", "--b", "5", "--d1", "1,2,3,4", "--d2", "0,1,2,3")
    assert code == 2 and rep["status"] == "Degenerate"


def test_check_positivize_success(capsys, tmp_path):
    p = tmp_path / "m5.json"
    p.write_text(json.dumps({"matrices": [[4, 0, 2, 1], [2, 1, 1, 2], [1, 2, 2, 1], [2, 1, 1, 2], [1, 2, 0, 4]]}))
    code, rep, _ = _json(capsys, "check-positivize", "--file", str(p))
    assert code == 0 and rep["status"] == "Conjugated"
    assert all(x > 0 for m in rep["images"] for row in m for x in row)


def test_recurrence_goldens(capsys):
    code, rep, _ = _json(capsys, "recurrence", "--pairs", "1,1")
    assert code == 0 and rep["estimate"] == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-9)
    code, rep, _ = _json(capsys, "recurrence", "--pairs", "2,1", "--route", "direct")
    assert code == 0 and rep["estimate"] == pytest.approx(1 + math.sqrt(2), abs=1e-9)
    code, _, err = _run(capsys, "recurrence", "--pairs", "0,1")
    assert code == 1 and "heteroclinic" in err


def test_recurrence_file(capsys, tmp_path):
    p = tmp_path / "rec.json"
    p.write_text(json.dumps({"mode": "recurrence", "pairs": [[1, 1], [1, 1]], "weights": [0.5, 0.5]}))
    code, rep, _ = _json(capsys, "recurrence", "--file", str(p))
    assert code == 0 and rep["estimate"] == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-9)


def test_mc_command(capsys, tmp_path):
    p = tmp_path / "fib.txt"
    p.write_text("0 1 1 1\n0 1 -1 1\n0 1 1 -1\n0 1 -1 -1\n")
    code, rep, _ = _json(capsys, "mc", "--file", str(p), "--steps", "20000", "--trials", "16", "--seed", "3")
    assert code == 0 and rep["status"] == "MonteCarlo"
    assert math.exp(rep["estimate"]) == pytest.approx(1.13198824, abs=2e-2)
    code2, rep2, _ = _json(capsys, "mc", "--file", str(p), "--steps", "20000", "--trials", "16", "--seed", "3")
    assert rep2["estimate"] == rep["estimate"]


def test_negative_entries_are_refused_by_kernel_path(capsys, tmp_path):
    p = tmp_path / "fib.txt"
    p.write_text("0 1 1 1\n0 1 -1 1\n")
    code, _, err = _run(capsys, "lyapunov", "--file", str(p))
    assert code == 1 and "error" in err


@pytest.mark.parametrize(
    "content, where",
    [
        ("1 2 3\n", ":1:"),
        ("2 1 1 2\n1 1 x 1\n", ":2"),
        ("2 1 1 2 0.5\n1 1 1 2\n", "every line"),
        ('{"matrices": [[1, 2, 3]]}', "matrices[0]"),
        ('{"matrices": [[2, 1, 1, 2]], "weights": [0.3]}', "weights"),
        ('{"matrices": [[2, 1, 1, 2]],', "invalid JSON"),
        ("", "no matrices"),
    ],
)
def test_malformed_input(capsys, tmp_path, content, where):
    p = tmp_path / "bad.txt"
    p.write_text(content)
    code, out, err = _run(capsys, "lyapunov", "--file", str(p))
    assert code == 1 and out == ""
    assert str(p) in err and where in err


def test_usage_errors(capsys):
    assert _run(capsys, "cantor-dim", "--b", "5", "--d1", "0,a", "--d2", "1")[0] == 1
    assert _run(capsys, "cantor-dim", "--b", "5", "--d1", "0,7", "--d2", "1")[0] == 1
    assert _run(capsys, "lyapunov")[0] == 1
    assert _run(capsys, "frobnicate")[0] == 1
    assert _run(capsys, "lyapunov", "--file", "/nonexistent/x.json")[0] == 1


def test_exact_text_numbers(capsys, tmp_path):
    p = tmp_path / "exact.txt"
    p.write_text("3/2 1/2 1/2 3/2 1/3\n2 1 1 2 2/3\n")
    code, rep, _ = _json(capsys, "lyapunov", "--file", str(p))
    assert code == 0
    assert rep["input"]["matrices"][0] == [["3/2", "1/2"], ["1/2", "3/2"]]
    # both matrices share the eigenvector (1, 1) with eigenvalues 2 and 3
    assert rep["estimate"] == pytest.approx(math.log(2) / 3 + 2 * math.log(3) / 3, abs=1e-9)


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lyapkernel", "census", "--b", "4", "--threads", "1"],
        capture_output=True, text=True, env={"LYAP_LOG": "info", "PATH": ""},
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[-1] == "4,196,190,96.94,0,0.00"
    assert "census b=4" in proc.stderr
