from __future__ import annotations

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from frameward import __version__
from frameward.cli import format_value, main, write_csv
from frameward.experiments import CSV_FIELDS, SweepRecord, error_sweep
from frameward.frames import FrameSpec

HEADER = "family,params,f_id,N,M,eps,method,l2_error,coeff_norm,A_N,B_N,kappa,rank_kept,precision_bits,wall_time_ms"


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for k in list(os.environ):
        if k.startswith("FRAMEWARD_"):
            monkeypatch.delenv(k)


def _rows(path):
    text = path.read_bytes().decode("utf-8")
    assert "\r" not in text and text.endswith("\n")
    lines = text.split("\n")[:-1]
    assert lines[0] == HEADER
    return [dict(zip(CSV_FIELDS, ln.split(","))) for ln in lines[1:]]


# ---------------------------------------------------------------- CSV writer

def test_header_matches_schema():
    assert ",".join(CSV_FIELDS) == HEADER


def test_empty_record_list_writes_header_only(tmp_path):
    path = tmp_path / "e.csv"
    write_csv([], path)
    assert path.read_bytes() == (HEADER + "\n").encode()


def test_identity_record_kappa_is_one(tmp_path):
    path = tmp_path / "i.csv"
    write_csv([SweepRecord("augf", "K=4", N=4, method="spectrum", A_N=1.0, B_N=1.0, kappa=1.0 / 1.0)], path)
    row = _rows(path)[0]
    assert row["kappa"] == "1.0" and row["f_id"] == "NA" and row["eps"] == "NA"


def test_reals_are_shortest_round_trip():
    for v in (0.1, 1e-8, 2.0 / 3.0, 5.64e13, -1.5e-300):
        assert float(format_value(v)) == v
        assert format_value(v) == repr(v)
    assert format_value(None) == "NA"
    assert format_value(float("nan")) == "NA"
    assert format_value(np.float64(0.25)) == "0.25"
    assert format_value(np.int64(7)) == "7"
    assert format_value(math.inf) == "inf"


def test_no_timing_writes_na(tmp_path):
    path = tmp_path / "t.csv"
    write_csv([SweepRecord("fe", "T=2", N=4, wall_time_ms=12.5)], path, timing=False)
    assert _rows(path)[0]["wall_time_ms"] == "NA"


def test_csv_to_stdout(capsys):
    write_csv([], None)
    assert capsys.readouterr().out == HEADER + "\n"


# ---------------------------------------------------------------- commands

def test_gram_spectrum_example(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["gram-spectrum", "--frame", "fe", "--T", "2", "--N", "50", "--precision", "256",
                 "--out", str(out)]) == 0
    row = _rows(out)[0]
    assert row["N"] == "50" and row["precision_bits"] == "256" and row["method"] == "spectrum"
    assert float(row["kappa"]) == float(row["B_N"]) / float(row["A_N"])
    assert "# N=50 done (" in capsys.readouterr().err
    dat = (tmp_path / "s.dat").read_text().splitlines()
    assert dat[0] == "n sigma" and len(dat) == 51
    sig = [float(ln.split()[1]) for ln in dat[1:]]
    assert sig == sorted(sig, reverse=True)


def test_table1_example_small(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["table1", "--frame", "fe", "--T", "2", "--f", "runge16", "--N", "10,20,40",
                 "--precision", "auto", "--out", str(out), "--quiet"]) == 0
    rows = _rows(out)
    assert [r["N"] for r in rows] == ["10", "20", "40"]
    ref = (2.27, 5.05e1, 3.64e4)
    for r, x in zip(rows, ref):
        assert x / 10 <= float(r["coeff_norm"]) <= x * 10
    assert int(rows[-1]["precision_bits"]) >= 128
    dat = (tmp_path / "t.dat").read_text().splitlines()
    assert dat[0] == "N norm_runge16 kappa"


def test_project_example_matches_error_sweep(tmp_path):
    out, coeffs = tmp_path / "p.csv", tmp_path / "c.txt"
    assert main(["project", "--frame", "augf", "--K", "8", "--f", "pole", "--N", "64", "--eps", "1e-8",
                 "--emit-coeffs", str(coeffs), "--out", str(out), "--quiet"]) == 0
    row = _rows(out)[0]
    lines = coeffs.read_text().splitlines()
    assert lines[0] == "k index re im" and len(lines) == 65
    z = np.array([complex(float(ln.split()[-2]), float(ln.split()[-1])) for ln in lines[1:]])
    assert float(row["coeff_norm"]) == pytest.approx(np.linalg.norm(z), rel=1e-15)
    rec = error_sweep(FrameSpec.augmented_fourier(8), "pole", [64], (1e-8,))[0]
    assert float(row["l2_error"]) == pytest.approx(rec.l2_error, rel=1e-12)
    assert int(row["rank_kept"]) == rec.rank_kept
    assert float(row["coeff_norm"]) == pytest.approx(rec.coeff_norm, rel=1e-12)


def test_project_dump_matrix(tmp_path):
    dump = tmp_path / "g.txt"
    assert main(["project", "--N", "6", "--eps", "1e-8", "--dump-matrix", str(dump), "--quiet",
                 "--out", str(tmp_path / "p.csv")]) == 0
    lines = dump.read_text().splitlines()
    assert len(lines) == 36 and len(lines[0].split()) == 4


def test_condition_sweep_and_error_sweep_outputs(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["condition-sweep", "--N", "10,12,14", "--precision", "double", "--out", str(out)]) == 0
    err = capsys.readouterr().err
    assert err.count("done (") == 3 and "growth fit" in err
    assert len(_rows(out)) == 3
    assert (tmp_path / "c.dat").read_text().splitlines()[0] == "N kappa A_N B_N bound"
    out2 = tmp_path / "e.csv"
    assert main(["error-sweep", "--N", "8,12", "--eps", "1e-8", "--method", "tsvd,dual", "--out", str(out2),
                 "--plot-data", str(tmp_path / "e.txt"), "--quiet"]) == 0
    assert [r["method"] for r in _rows(out2)] == ["tsvd", "dual", "tsvd", "dual"]
    assert (tmp_path / "e.txt").exists() and not (tmp_path / "e.dat").exists()


def test_oversample_sweep_command(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["oversample-sweep", "--N", "10,20", "--gamma", "1,2", "--eps", "1e-12", "--out", str(out),
                 "--quiet"]) == 0
    rows = _rows(out)
    assert [(r["M"], r["N"]) for r in rows] == [("10", "10"), ("20", "20"), ("20", "10"), ("40", "20")]
    header = (tmp_path / "o.dat").read_text().splitlines()[0].split()
    assert any(h.startswith("coeff_norm") for h in header)


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["error-sweep", "--frame", "wleg", "--f", "mixed", "--N", "6,10", "--eps", "1e-4,1e-8", "--no-timing",
            "--quiet"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------- exit codes and environment

@pytest.mark.parametrize("argv", [
    ["gram-spectrum", "--bogus"],
    ["nosuch"],
    [],
    ["gram-spectrum", "--N", "ten"],
    ["gram-spectrum", "--frame", "hex"],
    ["project", "--f", "nosuch"],
    ["gram-spectrum", "--frame", "augf", "--K", "8", "--N", "4"],
    ["project", "--N", "8,10"],
    ["project", "--eps", "-1"],
    ["error-sweep", "--method", "magic"],
    ["oversample-sweep", "--gamma", "0.5"],
    ["gram-spectrum", "--precision", "lots"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as err:
        code = main(argv)
        raise SystemExit(code)
    assert err.value.code == 2
    assert capsys.readouterr().err


def test_precision_refusal_exits_3(tmp_path, capsys):
    code = main(["table1", "--N", "40", "--f", "exp", "--precision", "53", "--out", str(tmp_path / "r.csv"),
                 "--quiet"])
    assert code == 3
    assert "error:" in capsys.readouterr().err
    assert _rows(tmp_path / "r.csv")[0]["coeff_norm"] == "NA"


def test_unwritable_output_exits_3(tmp_path, capsys):
    code = main(["gram-spectrum", "--N", "4", "--out", str(tmp_path / "missing" / "x.csv"), "--quiet"])
    assert code == 3
    assert "Error" in capsys.readouterr().err


def test_environment_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("FRAMEWARD_N", "6")
    monkeypatch.setenv("FRAMEWARD_FRAME", "augon")
    monkeypatch.setenv("FRAMEWARD_NO_TIMING", "1")
    monkeypatch.setenv("FRAMEWARD_OUT", str(tmp_path / "env.csv"))
    monkeypatch.setenv("FRAMEWARD_QUIET", "yes")
    assert main(["gram-spectrum"]) == 0
    row = _rows(tmp_path / "env.csv")[0]
    assert row["family"] == "augon" and row["N"] == "6" and row["wall_time_ms"] == "NA"


def test_flag_wins_over_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FRAMEWARD_N", "6")
    monkeypatch.setenv("FRAMEWARD_PRECISION", "128")
    out = tmp_path / "f.csv"
    assert main(["gram-spectrum", "--N", "8", "--precision", "double", "--out", str(out), "--quiet"]) == 0
    row = _rows(out)[0]
    assert row["N"] == "8" and row["precision_bits"] == "53"


def test_bad_environment_value_exits_2(monkeypatch):
    monkeypatch.setenv("FRAMEWARD_N", "six")
    with pytest.raises(SystemExit) as err:
        main(["gram-spectrum"])
    assert err.value.code == 2


def test_selftest_subset(capsys):
    assert main(["selftest", "--criteria", "1,14"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2 and "2/2 criteria passed" in out


def _run(*args, env=None):
    e = {k: v for k, v in os.environ.items() if not k.startswith("FRAMEWARD_")}
    e.update(env or {})
    return subprocess.run([sys.executable, "-m", "frameward", *args], capture_output=True, text=True, env=e,
                          timeout=300)


def test_module_entry_point_version():
    r = _run("--version")
    assert r.returncode == 0 and __version__ in r.stdout


def test_module_entry_point_usage_error():
    r = _run("gram-spectrum", "--bogus")
    assert r.returncode == 2 and "usage" in r.stderr


def test_module_entry_point_writes_stdout():
    r = _run("gram-spectrum", "--N", "4", "--quiet", "--no-timing")
    assert r.returncode == 0
    assert r.stdout.splitlines()[0] == HEADER and r.stderr == ""
