"""Benchmark harness: CSV schemas, determinism, traces, and plotting."""

from pathlib import Path

import numpy as np
import pytest

from slewmpc.harness import (
    CLOSED_LOOP_COLUMNS,
    CONVERGENCE_COLUMNS,
    RAW_TIMING_COLUMNS,
    SUMMARY_TIMING_COLUMNS,
    BenchmarkSpec,
    closed_loop_simulate,
    emit_plotdata,
    read_csv_rows,
    run_convergence_trace,
    run_timing_benchmark,
    summarize_timing,
    timing_ratio_table,
    write_closed_loop_csv,
)
from slewmpc.problems import load_model_config
from slewmpc.solvers import ADMMConfig, FGMConfig

AIRCRAFT = Path(__file__).resolve().parent.parent / "configs" / "aircraft_sketch.json"


def small_spec(tmp_path, **kw):
    defaults = dict(horizons=(4, 8), instances=3, seed=1, outdir=tmp_path)
    defaults.update(kw)
    return BenchmarkSpec(**defaults)


# ---------------------------------------------------------------------------
# spec validation


def test_spec_rejects_bad_inputs(tmp_path):
    with pytest.raises(ValueError):
        BenchmarkSpec(instances=0, outdir=tmp_path)
    with pytest.raises(ValueError):
        BenchmarkSpec(horizons=(1, 8), outdir=tmp_path)
    with pytest.raises(ValueError):
        BenchmarkSpec(horizons=(), outdir=tmp_path)
    with pytest.raises(ValueError):
        BenchmarkSpec(cond_target=0.5, outdir=tmp_path)


def test_spec_normalizes_outdir(tmp_path):
    spec = BenchmarkSpec(outdir=str(tmp_path))
    assert isinstance(spec.outdir, Path)


# ---------------------------------------------------------------------------
# timing benchmark


def test_timing_benchmark_schema_and_content(tmp_path):
    spec = small_spec(tmp_path, fgm=FGMConfig(i_max=40), admm=ADMMConfig(i_max=40))
    result = run_timing_benchmark(spec)
    raw = read_csv_rows(result.raw_path)
    assert list(raw[0].keys()) == list(RAW_TIMING_COLUMNS)
    assert len(raw) == 2 * 2 * 3  # horizons x solvers x instances
    assert {row["solver"] for row in raw} == {"fgm", "admm"}
    assert all(int(row["iterations"]) == 40 for row in raw)
    assert all(float(row["total_seconds"]) > 0 for row in raw)
    summary = read_csv_rows(result.summary_path)
    assert list(summary[0].keys()) == list(SUMMARY_TIMING_COLUMNS)
    # mean and median rows per (horizon, solver)
    assert len(summary) == 2 * 2 * 2


def test_timing_iterations_deterministic_across_runs(tmp_path):
    spec1 = small_spec(tmp_path / "a", fgm=FGMConfig(i_max=30), admm=ADMMConfig(i_max=30))
    spec2 = small_spec(tmp_path / "b", fgm=FGMConfig(i_max=30), admm=ADMMConfig(i_max=30))
    r1 = run_timing_benchmark(spec1)
    r2 = run_timing_benchmark(spec2)
    rows1 = read_csv_rows(r1.raw_path)
    rows2 = read_csv_rows(r2.raw_path)
    # everything except wall-clock columns must be bit-identical
    strip = ("total_seconds", "setup_seconds")
    for a, b in zip(rows1, rows2):
        assert {k: v for k, v in a.items() if k not in strip} == \
               {k: v for k, v in b.items() if k not in strip}


def test_summarize_timing_math(tmp_path):
    # hand-built raw file with known mean/median
    from slewmpc.harness import _write_csv
    rows = [
        {"experiment": "timing", "horizon": 8, "solver": "fgm", "instance": i,
         "iterations": 10, "total_seconds": t, "setup_seconds": 0.5}
        for i, t in enumerate([1.0, 2.0, 6.0])
    ]
    path = _write_csv(tmp_path / "raw.csv", RAW_TIMING_COLUMNS, rows)
    summary = summarize_timing(path)
    by_stat = {row["statistic"]: row for row in summary}
    assert float(by_stat["mean"]["per_iteration_seconds"]) == pytest.approx(0.3)
    assert float(by_stat["median"]["per_iteration_seconds"]) == pytest.approx(0.2)
    assert int(by_stat["mean"]["instances"]) == 3


def test_timing_ratio_table(tmp_path):
    spec = small_spec(tmp_path, fgm=FGMConfig(i_max=25), admm=ADMMConfig(i_max=25))
    result = run_timing_benchmark(spec)
    table = timing_ratio_table(result.summary)
    assert [row["horizon"] for row in table] == [4, 8]
    for row in table:
        assert row["fgm_per_iteration"] > 0 and row["admm_per_iteration"] > 0
        assert row["ratio_excluding_setup"] > 0
        assert row["ratio_including_setup"] > 0


# ---------------------------------------------------------------------------
# convergence traces


def test_dykstra_trace_schema_and_decay(tmp_path):
    spec = small_spec(tmp_path, instances=5)
    path = run_convergence_trace(spec, "dykstra")
    rows = read_csv_rows(path)
    assert list(rows[0].keys()) == list(CONVERGENCE_COLUMNS)
    assert {r["series"] for r in rows} == {"std100", "std10"}
    d = {int(r["iteration"]): float(r["mean_distance"]) for r in rows
         if int(r["horizon"]) == 4 and r["series"] == "std10"}
    assert d[200] <= 1e-6          # well converged after 200 sweeps
    assert d[1] >= d[200]
    far = {int(r["iteration"]): float(r["mean_distance"]) for r in rows
           if int(r["horizon"]) == 8 and r["series"] == "std100"}
    assert far[1] > far[1000]      # visible decay for far starts


def test_solver_trace_final_distances_comparable(tmp_path):
    spec = small_spec(tmp_path, horizons=(8,), instances=5,
                      fgm=FGMConfig(i_max=500), admm=ADMMConfig(i_max=500))
    path = run_convergence_trace(spec, "solver")
    rows = read_csv_rows(path)
    assert {r["series"] for r in rows} == {"fgm", "admm"}
    finals = {}
    for series in ("fgm", "admm"):
        d = {int(r["iteration"]): float(r["mean_distance"]) for r in rows
             if r["series"] == series}
        finals[series] = d[max(d)]
        assert d[max(d)] < d[1]
    # both hit tight accuracy; neither lags the other by more than 10x
    # (floored to avoid 0/0 comparisons at machine precision)
    floor = 1e-10
    a = max(finals["fgm"], floor)
    b = max(finals["admm"], floor)
    assert max(a / b, b / a) <= 10.0 or max(finals.values()) <= 1e-6


def test_convergence_rejects_unknown_kind(tmp_path):
    with pytest.raises(ValueError):
        run_convergence_trace(small_spec(tmp_path), "nope")


# ---------------------------------------------------------------------------
# closed loop


def test_closed_loop_equilibrium_stays_at_zero():
    model = load_model_config(AIRCRAFT)
    n_x = model.system.n_x
    trace = closed_loop_simulate(model, "fgm", T=4, steps=20, x0=np.zeros(n_x))
    np.testing.assert_array_equal(trace.inputs, 0.0)
    np.testing.assert_array_equal(trace.states, 0.0)
    assert trace.feasible()


def test_closed_loop_recursion_is_exact():
    model = load_model_config(AIRCRAFT)
    trace = closed_loop_simulate(model, "admm", T=4, steps=30, seed=5)
    A, B = model.system.A, model.system.B
    for t in range(30):
        resid = trace.states[t + 1] - (A @ trace.states[t] + B @ trace.inputs[t])
        np.testing.assert_array_equal(resid, 0.0)
    assert trace.feasible(tol=1e-6)


def test_closed_loop_csv_round_trip(tmp_path):
    model = load_model_config(AIRCRAFT)
    trace = closed_loop_simulate(model, "fgm", T=4, steps=10, seed=2)
    path = write_closed_loop_csv(tmp_path / "cl.csv", trace)
    rows = read_csv_rows(path)
    assert list(rows[0].keys()) == list(CLOSED_LOOP_COLUMNS)
    assert len(rows) == 10
    for t, row in enumerate(rows):
        assert float(row["margin"]) == float(trace.margins[t])
        assert float(row["solve_seconds"]) == float(trace.solve_seconds[t])


# ---------------------------------------------------------------------------
# plot artifacts


def test_emit_plotdata_timing(tmp_path):
    spec = small_spec(tmp_path, fgm=FGMConfig(i_max=20), admm=ADMMConfig(i_max=20))
    result = run_timing_benchmark(spec)
    outs = emit_plotdata(result.summary_path, "timing")
    names = {p.name for p in outs}
    assert any(n.endswith(".gp") for n in names)
    dats = [p for p in outs if p.suffix == ".dat"]
    assert dats, "expected data files"
    for dat in dats:
        lines = [l for l in dat.read_text().splitlines() if not l.startswith("#")]
        assert lines


def test_emit_plotdata_round_trip_exact(tmp_path):
    spec = small_spec(tmp_path, instances=2)
    path = run_convergence_trace(spec, "dykstra")
    outs = emit_plotdata(path, "converge")
    rows = read_csv_rows(path)
    wanted = {}
    for r in rows:
        if int(r["horizon"]) == 4 and r["series"] == "std10":
            wanted[int(r["iteration"])] = r["mean_distance"]
    dat = next(p for p in outs if p.name.endswith("T4_std10.dat"))
    for line in dat.read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        it, val = line.split()
        assert val == wanted[int(it)]  # byte-exact round trip


def test_emit_plotdata_missing_columns_listed(tmp_path):
    model = load_model_config(AIRCRAFT)
    trace = closed_loop_simulate(model, "fgm", T=4, steps=5, seed=0)
    path = write_closed_loop_csv(tmp_path / "cl.csv", trace)
    with pytest.raises(ValueError) as err:
        emit_plotdata(path, "converge")
    msg = str(err.value)
    for col in ("horizon", "series", "iteration", "mean_distance"):
        assert col in msg


def test_emit_plotdata_unknown_kind(tmp_path):
    model = load_model_config(AIRCRAFT)
    trace = closed_loop_simulate(model, "fgm", T=4, steps=5, seed=0)
    path = write_closed_loop_csv(tmp_path / "cl.csv", trace)
    with pytest.raises(ValueError):
        emit_plotdata(path, "histogram")
