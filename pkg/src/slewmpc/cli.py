"""Command-line front end: one-shot solves, benchmarks, simulation, plotting.

Subcommands
-----------
project        project a stacked input vector onto the rate/amplitude set
solve          solve one constrained MPC instance from a problem file
bench-timing   per-iteration timing benchmark over random instances
bench-converge convergence traces (projection sweeps or solver iterates)
simulate       closed-loop run of a model config, writes a step CSV
plot           turn a benchmark CSV into gnuplot data + script
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .harness import (
    BenchmarkSpec,
    closed_loop_simulate,
    emit_plotdata,
    run_convergence_trace,
    run_timing_benchmark,
    timing_ratio_table,
    write_closed_loop_csv,
)
from .problems import build_qp, load_model_config, load_problem
from .rateamp import RateAmpSet, dykstra_project
from .solvers import (
    ADMMConfig,
    FGMConfig,
    admm_setup,
    admm_solve,
    build_lifted,
    fgm_setup,
    fgm_solve,
    memory_footprint,
    warm_start_shift,
)


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _fmt_vec(v: np.ndarray) -> str:
    return "[" + ", ".join(f"{x:.12g}" for x in np.asarray(v).ravel()) + "]"


def _cmd_project(args: argparse.Namespace) -> int:
    point = args.point
    n_u = args.n_u
    if point.size % n_u != 0:
        print(f"error: point length {point.size} is not a multiple of --n-u {n_u}", file=sys.stderr)
        return 2
    T = point.size // n_u
    u_prev = args.u_prev if args.u_prev is not None else np.zeros(n_u)
    uset = RateAmpSet(
        a=np.broadcast_to(args.a, (n_u,)),
        r=np.broadcast_to(args.r, (n_u,)),
        u_prev=np.broadcast_to(u_prev, (n_u,)),
        T=T,
    )
    res = dykstra_project(point, uset, j_max=args.jmax, eps=args.eps)
    print(f"horizon {T}, channels {n_u}, sweeps {res.sweeps}")
    print(f"projection {_fmt_vec(res.u)}")
    print(f"last step {res.last_step:.3e}, last gap {res.last_gap:.3e}")
    return 0


def _cmd_solve(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    qp = build_qp(problem)
    x0 = args.x0
    if x0.size != problem.system.n_x:
        print(f"error: --x0 has {x0.size} entries, model expects {problem.system.n_x}",
              file=sys.stderr)
        return 2

    if args.solver == "fgm":
        cfg = FGMConfig(i_max=args.imax)
        ws = fgm_setup(qp, cfg)
        res = fgm_solve(ws, x0, problem.uset)
        if args.warm:
            warm = warm_start_shift(res.u_opt, qp.n_u)
            res = fgm_solve(ws, x0, problem.uset, warm=warm)
    else:
        cfg = ADMMConfig(rho=args.rho, i_max=args.imax)
        ws = admm_setup(qp, build_lifted(problem.uset), cfg)
        res = admm_solve(ws, x0)
        if args.warm:
            n_u = qp.n_u
            v, g = res.aux
            half = v.size // 2
            warm = (
                warm_start_shift(res.u_opt, n_u),
                np.concatenate([warm_start_shift(v[:half], n_u), warm_start_shift(v[half:], n_u)]),
                np.concatenate([warm_start_shift(g[:half], n_u), warm_start_shift(g[half:], n_u)]),
            )
            res = admm_solve(ws, x0, warm=warm)
    print(f"solver {args.solver}, iterations {res.iterations}")
    print(f"u0 {_fmt_vec(res.u0)}")
    print(f"u  {_fmt_vec(res.u_opt)}")
    return 0


def _spec_from_args(args: argparse.Namespace) -> BenchmarkSpec:
    return BenchmarkSpec(
        horizons=args.horizons,
        instances=args.instances,
        seed=args.seed,
        n_u=args.n_u,
        cond_target=args.cond,
        fgm=FGMConfig(i_max=args.fgm_imax),
        admm=ADMMConfig(rho=args.rho, i_max=args.admm_imax),
        outdir=Path(args.outdir),
    )


def _cmd_bench_timing(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    result = run_timing_benchmark(spec)
    print(f"raw timings: {result.raw_path}")
    print(f"summary:     {result.summary_path}")
    table = timing_ratio_table(result.summary)
    print("horizon  fgm/admm per-iter (excl setup)  (incl setup)")
    for row in table:
        print(f"{row['horizon']:7d}  {row['ratio_excluding_setup']:30.4f}  "
              f"{row['ratio_including_setup']:12.4f}")
    mem = memory_footprint(max(spec.horizons), spec.n_u)
    print(f"memory ratio fgm/admm at T={max(spec.horizons)}: {mem.ratio:.4f} "
          f"(all-dense variant {mem.ratio_alldense:.4f})")
    return 0


def _cmd_bench_converge(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    path = run_convergence_trace(spec, args.kind)
    print(f"convergence trace: {path}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    model = load_model_config(args.model)
    solvers = ("fgm", "admm") if args.solver == "both" else (args.solver,)
    traces = []
    for solver in solvers:
        trace = closed_loop_simulate(model, solver, T=args.horizon, steps=args.steps,
                                     seed=args.seed)
        traces.append(trace)
        print(f"{solver}: {args.steps} steps, worst margin {np.min(trace.margins):.3e}, "
              f"mean iterations {np.mean(trace.iterations):.1f}, "
              f"total solve time {np.sum(trace.solve_seconds):.3f}s")
    if len(traces) == 2:
        gap = max(float(np.max(np.abs(a - b)))
                  for a, b in zip(traces[0].inputs, traces[1].inputs))
        print(f"worst per-step input gap fgm vs admm: {gap:.3e}")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = write_closed_loop_csv(outdir / "closedloop.csv", traces)
    print(f"trace CSV: {path}")
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    outputs = emit_plotdata(args.csv, args.kind, outdir=args.outdir)
    for path in outputs:
        print(path)
    return 0


def _add_bench_options(p: argparse.ArgumentParser, horizons: str) -> None:
    p.add_argument("--horizons", type=_ints, default=_ints(horizons),
                   help=f"comma-separated horizons (default {horizons})")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-u", type=int, default=1, dest="n_u")
    p.add_argument("--cond", type=float, default=100.0,
                   help="target condition number for random Hessians")
    p.add_argument("--fgm-imax", type=int, default=500)
    p.add_argument("--admm-imax", type=int, default=500)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--outdir", default="results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slewmpc",
                                     description="rate/amplitude constrained MPC toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project a point onto the rate/amplitude set")
    p.add_argument("--point", type=_floats, required=True,
                   help="stacked input vector, comma separated")
    p.add_argument("--a", type=_floats, required=True, help="amplitude bound per channel")
    p.add_argument("--r", type=_floats, required=True, help="rate bound per channel")
    p.add_argument("--u-prev", type=_floats, default=None, dest="u_prev",
                   help="previously applied input (default 0)")
    p.add_argument("--n-u", type=int, default=1, dest="n_u")
    p.add_argument("--jmax", type=int, default=1000)
    p.add_argument("--eps", type=float, default=1e-9)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("solve", help="solve one MPC instance from a problem JSON")
    p.add_argument("--problem", required=True, help="problem definition file")
    p.add_argument("--x0", type=_floats, required=True, help="initial state, comma separated")
    p.add_argument("--solver", choices=("fgm", "admm"), default="fgm")
    p.add_argument("--imax", type=int, default=2000)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--warm", action="store_true",
                   help="re-solve warm-started from the shifted first solution")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bench-timing", help="per-iteration timing benchmark")
    _add_bench_options(p, "8,16,32")
    p.set_defaults(func=_cmd_bench_timing)

    p = sub.add_parser("bench-converge", help="convergence traces")
    p.add_argument("--kind", choices=("dykstra", "solver"), required=True)
    _add_bench_options(p, "4,8,16,32")
    p.set_defaults(func=_cmd_bench_converge)

    p = sub.add_parser("simulate", help="closed-loop simulation of a model config")
    p.add_argument("--model", required=True, help="model config JSON")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--solver", choices=("fgm", "admm", "both"), default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", default="results")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("plot", help="emit gnuplot data + script for a benchmark CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", choices=("timing", "converge", "closedloop"), required=True)
    p.add_argument("--outdir", default=None)
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
