"""End-to-end exercises of every CLI subcommand."""

from pathlib import Path

import numpy as np
import pytest

from slewmpc.cli import main
from slewmpc.harness import read_csv_rows

ROOT = Path(__file__).resolve().parent.parent
AIRCRAFT = str(ROOT / "configs" / "aircraft_sketch.json")
INTEGRATOR = str(ROOT / "configs" / "double_integrator.json")


def test_project_command(capsys):
    rc = main(["project", "--point", "3,-3,0.5,2", "--a", "1", "--r", "1"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "0.5" in out and "sweeps" in out


def test_project_command_rejects_ragged_input(capsys):
    rc = main(["project", "--point", "1,2,3", "--a", "1", "--r", "1",
               "--n-u", "2"])
    assert rc == 2
    assert "multiple" in capsys.readouterr().err


def test_solve_command_fgm_admm_agree(capsys):
    rc = main(["solve", "--problem", INTEGRATOR, "--x0", "2,-1",
               "--solver", "fgm", "--imax", "3000"])
    assert rc == 0
    out_f = capsys.readouterr().out
    rc = main(["solve", "--problem", INTEGRATOR, "--x0", "2,-1",
               "--solver", "admm", "--imax", "3000"])
    assert rc == 0
    out_a = capsys.readouterr().out
    u_f = out_f.splitlines()[-1]
    u_a = out_a.splitlines()[-1]
    assert u_f.startswith("u ") and u_f == u_a


def test_solve_command_warm_flag(capsys):
    rc = main(["solve", "--problem", INTEGRATOR, "--x0", "1,0",
               "--solver", "admm", "--warm"])
    assert rc == 0
    assert "iterations" in capsys.readouterr().out


def test_solve_command_checks_state_dimension(capsys):
    rc = main(["solve", "--problem", INTEGRATOR, "--x0", "1,2,3"])
    assert rc == 2
    assert "expects" in capsys.readouterr().err


def test_bench_timing_command(tmp_path, capsys):
    rc = main(["bench-timing", "--horizons", "4,8", "--instances", "2",
               "--fgm-imax", "20", "--admm-imax", "20",
               "--outdir", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "memory ratio" in out
    raw = next(tmp_path.glob("*raw*.csv"))
    assert len(read_csv_rows(raw)) == 2 * 2 * 2


def test_bench_converge_command(tmp_path, capsys):
    rc = main(["bench-converge", "--kind", "dykstra", "--horizons", "4",
               "--instances", "2", "--outdir", str(tmp_path)])
    assert rc == 0
    path = Path(capsys.readouterr().out.split(": ")[-1].strip())
    assert path.exists()


def test_simulate_and_plot_commands(tmp_path, capsys):
    rc = main(["simulate", "--model", AIRCRAFT, "--steps", "20",
               "--horizon", "4", "--solver", "both",
               "--outdir", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "input gap" in out
    csv_path = tmp_path / "closedloop.csv"
    assert csv_path.exists()
    rows = read_csv_rows(csv_path)
    assert len(rows) == 40  # both solvers

    rc = main(["plot", "--csv", str(csv_path), "--kind", "closedloop"])
    listing = capsys.readouterr().out
    assert rc == 0
    for line in listing.strip().splitlines():
        assert Path(line).exists()


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
