#!/usr/bin/env python3
"""Per-iteration timing comparison of the two solvers over random instances.

Runs both solvers at fixed iteration budgets on seeded random QPs for each
horizon, writes raw and summary CSVs, and prints the per-iteration time
ratio (fast gradient method over ADMM) with setup cost both excluded and
amortized in.  Also prints the solver memory ledger at the largest horizon.
"""

import argparse
from pathlib import Path

from slewmpc.harness import BenchmarkSpec, run_timing_benchmark, timing_ratio_table
from slewmpc.solvers import ADMMConfig, FGMConfig, memory_footprint


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizons", default="8,16,32,64")
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iters", type=int, default=500, help="fixed iteration count per solve")
    ap.add_argument("--outdir", default="results/timing")
    args = ap.parse_args()

    spec = BenchmarkSpec(
        horizons=tuple(int(t) for t in args.horizons.split(",")),
        instances=args.instances,
        seed=args.seed,
        fgm=FGMConfig(i_max=args.iters),
        admm=ADMMConfig(i_max=args.iters),
        outdir=Path(args.outdir),
    )
    result = run_timing_benchmark(spec)
    print(f"raw:     {result.raw_path}")
    print(f"summary: {result.summary_path}")

    table = timing_ratio_table(result.summary)
    print("\nhorizon   fgm/admm per-iteration   with setup amortized")
    for row in table:
        print(f"{row['horizon']:7d}   {row['ratio_excluding_setup']:22.4f}   "
              f"{row['ratio_including_setup']:20.4f}")

    T_max = max(spec.horizons)
    mem = memory_footprint(T_max, spec.n_u)
    print(f"\nmemory at T={T_max}: fgm {mem.fgm_floats} floats, "
          f"admm {mem.admm_floats} floats, ratio {mem.ratio:.4f} "
          f"(all-dense variant {mem.ratio_alldense:.4f})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
