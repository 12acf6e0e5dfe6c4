"""End-to-end tests for the experiment runner CLI."""

import csv
import subprocess
import sys

import numpy as np
import pytest
import scipy.io

import sgdg.cli as cli
from sgdg.cli import CliError, main, parse_nrange
from sgdg.spaces import SpaceSpec

# reference L2 columns (display-rounded table values, matched within 5%)
PROJECT_L2 = [5.23e-5, 7.26e-6, 9.96e-7, 1.35e-7, 1.81e-8]     # exp_prod d2 k2 vhat, N=2..6
SOLVE_L2 = [1.33e-4, 2.03e-5, 3.02e-6, 4.36e-7]                # ex2d_const k2, N=3..6
SOLVE_NNZ = [3456, 11124, 31596, 83028]
SOLVE_COND = [1.40e3, 5.49e3, 2.16e4, 8.58e4]


def read_rows(path):
    with open(path) as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def col(rows, header, name, idx=0):
    # idx selects among duplicate header names (the order columns)
    positions = [i for i, h in enumerate(header) if h == name]
    j = positions[idx]
    return [r[j] for r in rows]


def test_parse_nrange():
    assert parse_nrange("4") == [4]
    assert parse_nrange("3..6") == [3, 4, 5, 6]
    for bad in ("6..3", "a", "1..2..3", ""):
        with pytest.raises(CliError):
            parse_nrange(bad)


def test_project_table(tmp_path):
    out = str(tmp_path / "proj.csv")
    rc = main(["project", "exp_prod", "--d", "2", "--k", "2",
               "--N", "2..6", "--kind", "vhat", "--out", out])
    assert rc == 0
    header, rows = read_rows(out)
    assert header == ["N", "SGDOF", "FGDOF", "L1", "order", "L2", "order",
                      "Linf", "order", "H1", "order"]
    assert col(rows, header, "N") == ["2", "3", "4", "5", "6"]
    assert col(rows, header, "SGDOF") == ["72", "180", "432", "1008", "2304"]
    assert col(rows, header, "FGDOF") == ["144", "576", "2304", "9216",
                                          "36864"]
    fheader, frows = read_rows(str(tmp_path / "proj_full.csv"))
    assert fheader == header
    l2 = [float(v) for v in col(frows, fheader, "L2")]
    for got, ref in zip(l2, PROJECT_L2):
        assert got == pytest.approx(ref, rel=0.05)
    # display cells are the %.2E / %.2f renderings of the full values
    for disp_row, full_row in zip(rows, frows):
        for j, name in enumerate(header):
            if name in ("L1", "L2", "Linf", "H1"):
                assert disp_row[j] == "%.2E" % float(full_row[j])
            elif name == "order" and disp_row[j]:
                assert disp_row[j] == "%.2f" % float(full_row[j])
    # first row has no order entries, later rows do
    assert col(rows, header, "order", 1)[0] == ""
    assert col(rows, header, "order", 1)[1] != ""


def test_solve_table_with_sparsity_and_cond(tmp_path):
    out = str(tmp_path / "solve.csv")
    rc = main(["solve", "ex2d_const", "--k", "2", "--N", "3..6",
               "--out", out])
    assert rc == 0
    header, rows = read_rows(out)
    assert header[-3:] == ["NNZ", "Order", "Cond"]
    assert col(rows, header, "NNZ") == [str(v) for v in SOLVE_NNZ]
    assert col(rows, header, "Order") == ["1.57", "1.54", "1.50", "1.46"]
    _, frows = read_rows(str(tmp_path / "solve_full.csv"))
    l2 = [float(v) for v in col(frows, header, "L2")]
    for got, ref in zip(l2, SOLVE_L2):
        assert got == pytest.approx(ref, rel=0.05)
    cond = [float(v) for v in col(frows, header, "Cond")]
    for got, ref in zip(cond, SOLVE_COND):
        assert got == pytest.approx(ref, rel=0.10)


def test_config_file_with_cli_override(tmp_path):
    out = str(tmp_path / "t.csv")
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# projection study\n"
        "mode = project\n"
        "problem = exp_prod\n"
        "d = 2\n"
        "k = 1\n"
        "N = 3..4\n"
        "out = %s\n" % out)
    assert main(["--config", str(cfg)]) == 0
    header, rows = read_rows(out)
    assert col(rows, header, "SGDOF") == ["80", "192"]
    # flag overrides the file value of k
    assert main(["--config", str(cfg), "--k", "2"]) == 0
    header, rows = read_rows(out)
    assert col(rows, header, "SGDOF") == ["180", "432"]


def test_config_file_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mode = project\nwibble = 3\n")
    assert main(["--config", str(cfg)]) == 2
    cfg.write_text("mode = project\ncond = maybe\n")
    assert main(["--config", str(cfg)]) == 2
    cfg.write_text("mode\n")
    assert main(["--config", str(cfg)]) == 2


def test_usage_errors_exit_2():
    assert main([]) == 2                                    # no mode
    assert main(["project"]) == 2                           # no problem
    assert main(["project", "no_such_problem"]) == 2
    assert main(["project", "exp_prod"]) == 2               # missing --d
    assert main(["solve", "ex2d_const", "--kind", "vhathat"]) == 2
    assert main(["project", "ex2d_const", "--N", "6..3"]) == 2
    assert main(["solve", "ex2d_const", "--k", "11"]) == 2


def test_indefinite_system_exits_1(tmp_path, capsys):
    out = str(tmp_path / "bad.csv")
    rc = main(["solve", "ex2d_const", "--k", "1", "--N", "3",
               "--sigma", "0.1", "--out", out])
    assert rc == 1
    assert "nonpositive" in capsys.readouterr().err
    header, rows = read_rows(out)
    assert header[0] == "N" and rows == []


def test_dimension_cap_keeps_partial_table(tmp_path, monkeypatch):
    monkeypatch.setattr(
        cli, "SpaceSpec",
        lambda kind, d, N, k: SpaceSpec(kind, d, N, k, cap=500))
    out = str(tmp_path / "part.csv")
    rc = main(["project", "exp_prod", "--d", "2", "--k", "2",
               "--N", "2..6", "--out", out])
    assert rc == 1
    header, rows = read_rows(out)
    assert col(rows, header, "N") == ["2", "3", "4"]
    _, frows = read_rows(str(tmp_path / "part_full.csv"))
    assert len(frows) == 3


def test_rerun_is_bit_identical(tmp_path):
    args = ["solve", "ex2d_const", "--k", "1", "--N", "3..4"]
    outs = []
    for tag in ("a", "b"):
        out = str(tmp_path / ("%s.csv" % tag))
        assert main(args + ["--out", out]) == 0
        outs.append(open(str(tmp_path / ("%s_full.csv" % tag)), "rb").read())
    assert outs[0] == outs[1]


def test_thread_count_does_not_change_results(tmp_path):
    args = ["solve", "ex2d_const", "--k", "1", "--N", "3..4"]
    outs = []
    for nt in ("1", "2"):
        out = str(tmp_path / ("t%s.csv" % nt))
        assert main(args + ["--out", out, "--threads", nt]) == 0
        outs.append(open(str(tmp_path / ("t%s_full.csv" % nt)), "rb").read())
    assert outs[0] == outs[1]


def test_export_matrix_writes_symmetric_mtx(tmp_path):
    out = str(tmp_path / "run.csv")
    rc = main(["solve", "ex2d_const", "--k", "1", "--N", "3",
               "--out", out, "--export-matrix"])
    assert rc == 0
    mtx = tmp_path / "run_N3.mtx"
    assert mtx.exists()
    lines = [ln for ln in mtx.read_text().splitlines() if ln.strip()]
    assert lines[0].startswith("%%MatrixMarket")
    assert "symmetric" in lines[0]
    size = next(ln for ln in lines if not ln.startswith("%"))
    nrows, ncols, stored = (int(v) for v in size.split())
    # lower triangle on disk: (992 off+on-diagonal entries + 80 diagonal)/2
    assert (nrows, ncols, stored) == (80, 80, 536)
    a = scipy.io.mmread(str(mtx)).tocsr()
    assert a.shape == (80, 80)
    assert a.nnz == 2 * 536 - 80
    assert np.max(np.abs((a - a.T).data)) if (a - a.T).nnz else 0.0 == 0.0


def test_no_cond_leaves_column_empty(tmp_path):
    out = str(tmp_path / "nc.csv")
    rc = main(["solve", "ex2d_const", "--k", "1", "--N", "3",
               "--out", out, "--no-cond"])
    assert rc == 0
    header, rows = read_rows(out)
    assert col(rows, header, "Cond") == [""]


def test_cond_defaults_off_for_variable_coefficient(tmp_path):
    out = str(tmp_path / "gc.csv")
    rc = main(["solve", "ex2d_smooth", "--k", "1", "--N", "3",
               "--out", out])
    assert rc == 0
    header, rows = read_rows(out)
    assert col(rows, header, "Cond") == [""]
    # and can be forced back on
    rc = main(["solve", "ex2d_smooth", "--k", "1", "--N", "3",
               "--out", out, "--cond"])
    assert rc == 0
    header, rows = read_rows(out)
    assert float(col(rows, header, "Cond")[0]) > 1.0


def test_echo_without_out_path(capsys):
    rc = main(["project", "exp_prod", "--d", "2", "--k", "1", "--N", "2..3"])
    assert rc == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0].split() == ["N", "SGDOF", "FGDOF", "L1", "order", "L2",
                                "order", "Linf", "order", "H1", "order"]
    assert len(lines) == 3
    assert "wrote" not in out


def test_module_invocation():
    res = subprocess.run(
        [sys.executable, "-m", "sgdg.cli", "project", "exp_prod",
         "--d", "2", "--k", "1", "--N", "2"],
        capture_output=True, text=True)
    assert res.returncode == 0
    assert "SGDOF" in res.stdout
