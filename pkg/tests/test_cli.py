import csv
import subprocess
import sys

import pytest

from vbdf2.cli import EXIT_PRECONDITION, main, parse_mesh_spec
from vbdf2.errors import InvalidArgument
from vbdf2.mesh import R_S1, random_mesh, write_mesh_csv


def test_parse_generator_specs():
    m = parse_mesh_spec("random:N=16,seed=3")
    assert m.n_steps == 16
    assert parse_mesh_spec("capped:N=32,cap=2").ratios.max() <= 2.0
    assert parse_mesh_spec("geometric:N=5,ratio=2").ratios[0] == pytest.approx(2.0)
    with pytest.raises(InvalidArgument):
        parse_mesh_spec("random:seed=1")
    with pytest.raises(InvalidArgument):
        parse_mesh_spec("random:N=4,bogus=1")


def test_kernels_command(tmp_path, capsys):
    out = tmp_path / "k.csv"
    assert main(["kernels", "--mesh", "uniform:N=4", "--window", "3:4", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0][0] == "n" and len(rows) == 1 + 3 + 4


def test_check_mesh_from_file(tmp_path, capsys):
    p = tmp_path / "m.csv"
    write_mesh_csv(random_mesh(1.0, 20, 1), p)
    assert main(["check-mesh", str(p)]) == 0
    text = capsys.readouterr().out
    assert "S1" in text and "min eig B2" in text


def test_check_mesh_reports_missing_cr(capsys):
    assert main(["check-mesh", "geometric:N=6,ratio=4"]) == 0
    assert "C_r          n/a" in capsys.readouterr().out


def test_bad_window_exit_code(capsys):
    assert main(["kernels", "--mesh", "uniform:N=4", "--window", "3:9"]) == EXIT_PRECONDITION
    assert "error" in capsys.readouterr().err


def test_solve_heat_trace_and_dump(tmp_path, capsys):
    trace = tmp_path / "tr.csv"
    dump = tmp_path / "u.csv"
    rc = main(["solve-heat", "--N", "16", "--M", "8", "--trace", str(trace), "--dump", str(dump)])
    assert rc == 0
    assert "e(N)=" in capsys.readouterr().out
    assert trace.read_text().startswith("n,t_n,tau_n")
    assert dump.read_text().startswith("i,j,value")


def test_dahlquist_command(capsys):
    assert main(["dahlquist", "--lambda=-1,10", "--N", "32"]) == 0
    out = capsys.readouterr().out
    assert "S1=True" in out


def test_converge_json(tmp_path):
    out = tmp_path / "c.json"
    assert main(["converge", "--n-list", "16,32", "--M", "8", "--mesh-family", "uniform",
                 "--format", "json", "--out", str(out)]) == 0
    assert '"order"' in out.read_text()


def test_stability_suite_small(capsys):
    assert main(["stability-suite", "--cases", "1", "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("name,cases,passed")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "vbdf2", "check-mesh", f"capped:N=8,cap={R_S1}"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "S1           yes" in r.stdout
