#!/usr/bin/env python3
"""Convergence traces: projection sweeps and solver iterates.

Produces two CSVs with mean distances to exact references, plus gnuplot
artifacts for each:

* ``dykstra``: distance of the Dykstra iterate to the exact projection,
  averaged over random starts drawn at two scales (std 10 and std 100),
  for several horizons.
* ``solver``: distance of the fast gradient method and ADMM iterates to the
  exact constrained minimizer on random QP instances.
"""

import argparse
from pathlib import Path

from slewmpc.harness import BenchmarkSpec, emit_plotdata, run_convergence_trace


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", choices=("dykstra", "solver", "both"), default="both")
    ap.add_argument("--horizons", default="4,8,16,32")
    ap.add_argument("--instances", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="results/converge")
    args = ap.parse_args()

    spec = BenchmarkSpec(
        horizons=tuple(int(t) for t in args.horizons.split(",")),
        instances=args.instances,
        seed=args.seed,
        outdir=Path(args.outdir),
    )
    kinds = ("dykstra", "solver") if args.kind == "both" else (args.kind,)
    for kind in kinds:
        path = run_convergence_trace(spec, kind)
        artifacts = emit_plotdata(path, "converge")
        print(f"{kind}: {path}")
        for p in artifacts:
            print(f"  {p}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
