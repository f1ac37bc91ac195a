"""Benchmark execution and closed-loop simulation.

Three experiment families, all emitting CSV with documented headers:

* per-iteration timing of the two solvers over random instances, with the
  one-time ADMM factorization timed separately;
* convergence traces — Dykstra iterate distance to the certified projection,
  and solver iterate distance to a verified reference solution;
* a receding-horizon closed loop applying the first input stage each step.

Summary statistics are always recomputed from the persisted raw per-instance
file, so every summary row can be re-derived from data on disk.  Plot data is
written with shortest round-trip float formatting and a gnuplot script per
figure.
"""

from __future__ import annotations

import csv
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean, median

import numpy as np

from .oracle import exact_project, reference_solve
from .problems import ModelConfig, ProblemDef, build_qp, gen_random_problem, sample_x0
from .rateamp import RateAmpSet, dykstra_project
from .solvers import (
    ADMMConfig,
    FGMConfig,
    admm_setup,
    admm_solve,
    build_lifted,
    fgm_setup,
    fgm_solve,
    warm_start_shift,
)

RAW_TIMING_COLUMNS = [
    "experiment", "horizon", "solver", "instance",
    "iterations", "total_seconds", "setup_seconds",
]
SUMMARY_TIMING_COLUMNS = [
    "experiment", "horizon", "solver", "statistic",
    "per_iteration_seconds", "setup_seconds", "iterations", "instances",
]
CONVERGENCE_COLUMNS = ["experiment", "horizon", "series", "iteration", "mean_distance"]
CLOSED_LOOP_COLUMNS = ["step", "solver", "iterations", "solve_seconds", "margin"]


def _fmt(x) -> str:
    """Shortest exact decimal form for floats; plain str for everything else."""
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=columns)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(row[k]) for k in columns})
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from None
    return path


def read_csv_rows(path) -> list[dict]:
    path = Path(path)
    try:
        with open(path, newline="") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        raise OSError(f"cannot read {path}: {e}") from None


# ---------------------------------------------------------------------------
# timing benchmark


@dataclass(frozen=True)
class BenchmarkSpec:
    """Experiment scale knobs shared by the timing and convergence runs."""

    horizons: tuple[int, ...] = (8, 16, 32)
    instances: int = 20
    seed: int = 0
    n_u: int = 1
    cond_target: float = 100.0
    fgm: FGMConfig = field(default_factory=FGMConfig)
    admm: ADMMConfig = field(default_factory=lambda: ADMMConfig(i_max=500))
    outdir: Path = Path("results")

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(int(T) for T in self.horizons))
        object.__setattr__(self, "outdir", Path(self.outdir))
        if self.instances < 1:
            raise ValueError(f"instances must be >= 1, got {self.instances}")
        if not self.horizons or any(T < 2 for T in self.horizons):
            raise ValueError(f"horizons must all be >= 2, got {self.horizons}")
        if not self.cond_target >= 1.0:
            raise ValueError(f"cond_target must be >= 1, got {self.cond_target}")


@dataclass
class TimingResult:
    raw_path: Path
    summary_path: Path
    summary: list[dict]


def run_timing_benchmark(spec: BenchmarkSpec) -> TimingResult:
    """Fixed-iteration wall-time benchmark of both solvers on random instances.

    Each solver runs exactly its configured iteration budget (no early stop)
    per instance; one warm-up solve per (horizon, solver) is discarded.  Raw
    per-instance rows are persisted first, and the mean/median summary is
    computed by re-reading that file.
    """
    rows = []
    for T in spec.horizons:
        probs = [
            gen_random_problem(T, spec.n_u, spec.seed, spec.cond_target, instance=i)
            for i in range(spec.instances)
        ]
        x0s = [sample_x0(p, spec.seed, T, i) for i, p in enumerate(probs)]
        fgm_cfg = FGMConfig(
            i_max=spec.fgm.i_max, dykstra=spec.fgm.dykstra, early_stop=None
        )
        admm_cfg = ADMMConfig(rho=spec.admm.rho, i_max=spec.admm.i_max, early_stop=None)

        fgm_solve(fgm_setup(probs[0].qp, fgm_cfg), x0s[0], probs[0].uset)
        for i, p in enumerate(probs):
            t0 = time.perf_counter()
            ws = fgm_setup(p.qp, fgm_cfg)
            setup_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            res = fgm_solve(ws, x0s[i], p.uset)
            rows.append({
                "experiment": "timing", "horizon": T, "solver": "fgm", "instance": i,
                "iterations": res.iterations,
                "total_seconds": time.perf_counter() - t0,
                "setup_seconds": setup_s,
            })

        lif0 = build_lifted(probs[0].uset)
        admm_solve(admm_setup(probs[0].qp, lif0, admm_cfg), x0s[0])
        for i, p in enumerate(probs):
            t0 = time.perf_counter()
            ws = admm_setup(p.qp, build_lifted(p.uset), admm_cfg)
            setup_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            res = admm_solve(ws, x0s[i])
            rows.append({
                "experiment": "timing", "horizon": T, "solver": "admm", "instance": i,
                "iterations": res.iterations,
                "total_seconds": time.perf_counter() - t0,
                "setup_seconds": setup_s,
            })

    raw_path = _write_csv(spec.outdir / "timing_raw.csv", RAW_TIMING_COLUMNS, rows)
    summary = summarize_timing(raw_path)
    summary_path = _write_csv(
        spec.outdir / "timing_summary.csv", SUMMARY_TIMING_COLUMNS, summary
    )
    return TimingResult(raw_path=raw_path, summary_path=summary_path, summary=summary)


def summarize_timing(raw_path) -> list[dict]:
    """Mean and median per-iteration times per (horizon, solver), from the raw file."""
    raw = read_csv_rows(raw_path)
    if not raw:
        raise ValueError(f"no rows in {raw_path}")
    groups: dict[tuple, list[dict]] = {}
    for row in raw:
        groups.setdefault((row["experiment"], int(row["horizon"]), row["solver"]), []).append(row)
    summary = []
    for (exp, T, solver), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        per_iter = [float(r["total_seconds"]) / int(r["iterations"]) for r in grp]
        setups = [float(r["setup_seconds"]) for r in grp]
        iters = {int(r["iterations"]) for r in grp}
        if len(iters) != 1:
            raise ValueError(f"inconsistent iteration counts {iters} for {solver} T={T}")
        it_count = iters.pop()
        for stat, f in (("mean", mean), ("median", median)):
            summary.append({
                "experiment": exp, "horizon": T, "solver": solver, "statistic": stat,
                "per_iteration_seconds": f(per_iter), "setup_seconds": f(setups),
                "iterations": it_count, "instances": len(grp),
            })
    return summary


def timing_ratio_table(summary: list[dict]) -> list[dict]:
    """FGM/ADMM per-iteration time ratios per horizon, from mean-statistic rows.

    The "including setup" column amortizes the one-time ADMM factorization
    over the run's iteration budget; the FGM setup (a matrix scaling) is
    amortized the same way for symmetry.
    """
    by_key = {
        (int(r["horizon"]), r["solver"]): r
        for r in summary
        if r["statistic"] == "mean"
    }
    table = []
    for T in sorted({k[0] for k in by_key}):
        fgm, admm = by_key[(T, "fgm")], by_key[(T, "admm")]
        f_pi = float(fgm["per_iteration_seconds"])
        a_pi = float(admm["per_iteration_seconds"])
        f_incl = f_pi + float(fgm["setup_seconds"]) / int(fgm["iterations"])
        a_incl = a_pi + float(admm["setup_seconds"]) / int(admm["iterations"])
        table.append({
            "horizon": T,
            "fgm_per_iteration": f_pi,
            "admm_per_iteration": a_pi,
            "ratio_excluding_setup": f_pi / a_pi,
            "ratio_including_setup": f_incl / a_incl,
        })
    return table


# ---------------------------------------------------------------------------
# convergence traces


def _dykstra_checkpoints(j_max: int) -> list[int]:
    pts = set(range(1, 31)) | set(range(40, 201, 10)) | set(range(250, 1001, 50))
    return sorted(p for p in pts if p <= j_max)


def run_convergence_trace(spec: BenchmarkSpec, kind: str = "solver") -> Path:
    """Averaged distance-to-solution traces, one CSV row per checkpoint.

    kind="dykstra": distance of the Dykstra iterate to the certified exact
    projection, starts drawn N(0, std^2) for std in {100, 10}, averaged over
    ``spec.instances`` starts per horizon.

    kind="solver": distance of the FGM and ADMM iterates to a verified
    reference solution per outer iteration, averaged over random instances.
    """
    if kind == "dykstra":
        rows = _trace_dykstra(spec)
    elif kind == "solver":
        rows = _trace_solvers(spec)
    else:
        raise ValueError(f"unknown trace kind '{kind}' (expected 'dykstra' or 'solver')")
    return _write_csv(spec.outdir / f"converge_{kind}.csv", CONVERGENCE_COLUMNS, rows)


def _trace_dykstra(spec: BenchmarkSpec) -> list[dict]:
    j_max = 1000
    checkpoints = _dykstra_checkpoints(j_max)
    rows = []
    for T in spec.horizons:
        uset = RateAmpSet(
            a=np.ones(spec.n_u), r=np.ones(spec.n_u), u_prev=np.zeros(spec.n_u), T=T
        )
        for std in (100.0, 10.0):
            rng = np.random.default_rng([spec.seed, T, int(std)])
            dist_sum = np.zeros(len(checkpoints))
            for _ in range(spec.instances):
                x = rng.normal(0.0, std, size=uset.dim)
                ref = exact_project(x, uset)
                res = dykstra_project(
                    x, uset, j_max=j_max, eps=1e-15, trace_sweeps=checkpoints
                )
                for j, s in enumerate(checkpoints):
                    dist_sum[j] += float(np.linalg.norm(res.snapshots[s] - ref))
            for j, s in enumerate(checkpoints):
                rows.append({
                    "experiment": "dykstra", "horizon": T, "series": f"std{int(std)}",
                    "iteration": s, "mean_distance": dist_sum[j] / spec.instances,
                })
    return rows


def _trace_solvers(spec: BenchmarkSpec) -> list[dict]:
    rows = []
    for T in spec.horizons:
        fgm_cfg = FGMConfig(
            i_max=spec.fgm.i_max, dykstra=spec.fgm.dykstra, record_trace=True
        )
        admm_cfg = ADMMConfig(rho=spec.admm.rho, i_max=spec.admm.i_max, record_trace=True)
        sums = {"fgm": np.zeros(fgm_cfg.i_max), "admm": np.zeros(admm_cfg.i_max)}
        for i in range(spec.instances):
            p = gen_random_problem(T, spec.n_u, spec.seed, spec.cond_target, instance=i)
            x0 = sample_x0(p, spec.seed, T, i)
            ustar = reference_solve(p.qp, x0, p.uset).u
            ws = fgm_setup(p.qp, fgm_cfg)
            rf = fgm_solve(ws, x0, p.uset, reference=ustar)
            sums["fgm"] += rf.trace.distance
            aws = admm_setup(p.qp, build_lifted(p.uset), admm_cfg)
            ra = admm_solve(aws, x0, reference=ustar)
            sums["admm"] += ra.trace.distance
        for series, total in sums.items():
            for it, d in enumerate(total / spec.instances, start=1):
                rows.append({
                    "experiment": "solver", "horizon": T, "series": series,
                    "iteration": it, "mean_distance": float(d),
                })
    return rows


# ---------------------------------------------------------------------------
# closed-loop simulation


@dataclass
class ClosedLoopTrace:
    """Per-step record of a receding-horizon run.

    ``margins`` holds the worst signed constraint margin of the applied input
    at each step (amplitude and rate against the previously applied input);
    nonnegative means feasible.  The recorded states satisfy
    x(t+1) = A x(t) + B u(t) by construction.
    """

    solver: str
    states: np.ndarray
    inputs: np.ndarray
    iterations: np.ndarray
    solve_seconds: np.ndarray
    margins: np.ndarray

    def feasible(self, tol: float = 1e-6) -> bool:
        """True when every applied input respected its bounds within tol.

        Margins include the inter-step rate constraint: each step's applied
        input was checked against the input applied at the previous step.
        """
        return bool(np.min(self.margins) >= -tol)


def closed_loop_simulate(
    model: ModelConfig,
    solver: str,
    T: int,
    steps: int,
    seed: int = 0,
    x0=None,
    fgm_cfg: FGMConfig | None = None,
    admm_cfg: ADMMConfig | None = None,
) -> ClosedLoopTrace:
    """Receding-horizon run: solve, apply the first stage, advance the state.

    The input set's previous-input window tracks the applied input between
    steps, and each solve warm-starts from the previous solution shifted one
    stage.  The default initial state is a unit Gaussian direction scaled by
    the model's ``x0_scale``.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if solver not in ("fgm", "admm"):
        raise ValueError(f"unknown solver '{solver}' (expected 'fgm' or 'admm')")
    prob = model.problem(T)
    qp = build_qp(prob)
    A, B = prob.system.A, prob.system.B
    n_x, n_u = prob.system.n_x, prob.system.n_u
    if x0 is None:
        rng = np.random.default_rng([seed, 2])
        direction = rng.normal(size=n_x)
        x0 = model.x0_scale * direction / np.linalg.norm(direction)
    x = np.asarray(x0, dtype=float).ravel().copy()
    if x.size != n_x:
        raise ValueError(f"x0 has size {x.size}, expected {n_x}")

    if solver == "fgm":
        cfg = fgm_cfg if fgm_cfg is not None else FGMConfig(i_max=3000, early_stop=1e-6)
        ws = fgm_setup(qp, cfg)
    else:
        cfg = admm_cfg if admm_cfg is not None else ADMMConfig(i_max=5000, early_stop=1e-8)
        ws = admm_setup(qp, build_lifted(prob.uset), cfg)

    states = np.empty((steps + 1, n_x))
    inputs = np.empty((steps, n_u))
    iterations = np.empty(steps, dtype=int)
    solve_seconds = np.empty(steps)
    margins = np.empty(steps)
    states[0] = x
    applied = prob.uset.u_prev.copy()
    uset_t = prob.uset
    warm = None
    for t in range(steps):
        try:
            t0 = time.perf_counter()
            if solver == "fgm":
                res = fgm_solve(ws, x, uset_t, warm=warm)
            else:
                res = admm_solve(ws, x, warm=warm, lifted=build_lifted(uset_t))
            solve_seconds[t] = time.perf_counter() - t0
        except RuntimeError as e:
            raise RuntimeError(f"closed-loop step {t}: {e}") from None
        u0 = res.u0
        inputs[t] = u0
        iterations[t] = res.iterations
        margins[t] = min(
            float(np.min(uset_t.a - np.abs(u0))),
            float(np.min(uset_t.r - np.abs(u0 - applied))),
        )
        x = A @ x + B @ u0
        states[t + 1] = x
        applied = u0.copy()
        uset_t = prob.uset.with_u_prev(applied)
        if solver == "fgm":
            warm = warm_start_shift(res.u_opt, n_u)
        else:
            # shift the lifted variables and duals stage-wise too (each half of
            # v and gamma is itself a stage-stacked vector of length n)
            u_s = warm_start_shift(res.u_opt, n_u)
            n = qp.J.shape[0]
            v_prev, g_prev = res.aux
            v_s = np.concatenate(
                [warm_start_shift(v_prev[:n], n_u), warm_start_shift(v_prev[n:], n_u)]
            )
            g_s = np.concatenate(
                [warm_start_shift(g_prev[:n], n_u), warm_start_shift(g_prev[n:], n_u)]
            )
            warm = (u_s, v_s, g_s)
    return ClosedLoopTrace(
        solver=solver,
        states=states,
        inputs=inputs,
        iterations=iterations,
        solve_seconds=solve_seconds,
        margins=margins,
    )


def write_closed_loop_csv(path, traces: "ClosedLoopTrace | Sequence[ClosedLoopTrace]") -> Path:
    if isinstance(traces, ClosedLoopTrace):
        traces = [traces]
    rows = [
        {
            "step": t, "solver": trace.solver, "iterations": int(trace.iterations[t]),
            "solve_seconds": float(trace.solve_seconds[t]),
            "margin": float(trace.margins[t]),
        }
        for trace in traces
        for t in range(trace.inputs.shape[0])
    ]
    return _write_csv(Path(path), CLOSED_LOOP_COLUMNS, rows)


# ---------------------------------------------------------------------------
# plot data


def _require_columns(rows: list[dict], needed: list[str], path) -> None:
    have = set(rows[0].keys()) if rows else set()
    missing = [c for c in needed if c not in have]
    if missing:
        raise ValueError(f"{path} is missing expected columns: {', '.join(missing)}")


def emit_plotdata(csv_path, kind: str, outdir=None) -> list[Path]:
    """Write whitespace-delimited data files plus a gnuplot script for one CSV.

    kind="timing" expects the summary schema and writes one data file per
    solver (per-iteration seconds vs horizon, log-y).  kind="converge"
    expects the trace schema and writes one data file per (horizon, series)
    with a panel per horizon, log-y.  kind="closedloop" writes one data file
    of per-step solve times, log-y.  Values round-trip exactly.
    """
    csv_path = Path(csv_path)
    outdir = csv_path.parent if outdir is None else Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = read_csv_rows(csv_path)
    if not rows:
        raise ValueError(f"no rows in {csv_path}")
    stem = csv_path.stem
    written: list[Path] = []

    def dat(name: str, header: list[str], table: list[list]) -> Path:
        p = outdir / name
        lines = ["# " + " ".join(header)]
        lines += [" ".join(_fmt(v) for v in row) for row in table]
        p.write_text("\n".join(lines) + "\n")
        written.append(p)
        return p

    if kind == "timing":
        _require_columns(rows, SUMMARY_TIMING_COLUMNS, csv_path)
        solvers = sorted({r["solver"] for r in rows})
        for solver in solvers:
            table = [
                [int(r["horizon"]), float(r["per_iteration_seconds"]), float(r["setup_seconds"])]
                for r in rows
                if r["solver"] == solver and r["statistic"] == "mean"
            ]
            dat(f"{stem}_{solver}.dat", ["horizon", "per_iteration_seconds", "setup_seconds"], table)
        script = [
            "set logscale y",
            'set xlabel "horizon T"',
            'set ylabel "seconds per iteration"',
            "set key top left",
            "plot " + ", ".join(
                f'"{stem}_{s}.dat" using 1:2 with linespoints title "{s}"' for s in solvers
            ),
        ]
    elif kind == "converge":
        _require_columns(rows, CONVERGENCE_COLUMNS, csv_path)
        horizons = sorted({int(r["horizon"]) for r in rows})
        series = sorted({r["series"] for r in rows})
        for T in horizons:
            for s in series:
                table = [
                    [int(r["iteration"]), float(r["mean_distance"])]
                    for r in rows
                    if int(r["horizon"]) == T and r["series"] == s
                ]
                if table:
                    dat(f"{stem}_T{T}_{s}.dat", ["iteration", "mean_distance"], table)
        ncol = 2 if len(horizons) > 1 else 1
        nrow = (len(horizons) + ncol - 1) // ncol
        script = [
            f"set multiplot layout {nrow},{ncol}",
            "set logscale y",
            'set xlabel "iteration"',
            'set ylabel "mean distance"',
        ]
        for T in horizons:
            plots = ", ".join(
                f'"{stem}_T{T}_{s}.dat" using 1:2 with lines title "{s}"'
                for s in series
                if (outdir / f"{stem}_T{T}_{s}.dat") in written
            )
            script += [f'set title "T = {T}"', f"plot {plots}"]
        script.append("unset multiplot")
    elif kind == "closedloop":
        _require_columns(rows, CLOSED_LOOP_COLUMNS, csv_path)
        table = [
            [int(r["step"]), float(r["solve_seconds"]), float(r["margin"])]
            for r in rows
        ]
        dat(f"{stem}_steps.dat", ["step", "solve_seconds", "margin"], table)
        script = [
            "set logscale y",
            'set xlabel "step"',
            'set ylabel "solve seconds"',
            f'plot "{stem}_steps.dat" using 1:2 with lines title "solve time"',
        ]
    else:
        raise ValueError(
            f"unknown plot kind '{kind}' (expected 'timing', 'converge', or 'closedloop')"
        )
    gp = outdir / f"{stem}.gp"
    gp.write_text("\n".join(script) + "\n")
    written.append(gp)
    return written
