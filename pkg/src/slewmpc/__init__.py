"""Linear MPC with slew-rate and amplitude input constraints.

The package solves the condensed input-constrained MPC problem

    min_u  1/2 u' J u + q(x0)' u   s.t.  |u_k| <= a,  |u_k - u_{k-1}| <= r

with two first-order methods: a fast gradient method whose projection step
handles the coupled rate/amplitude set directly via Dykstra's alternating
scheme (no extra decision variables), and an ADMM baseline that lifts the
rate constraints into an augmented variable with cached factorizations.
Supporting modules provide exact projection/solve oracles, random problem
generators, benchmark harnesses, and a CLI (``slewmpc``).
"""

from .mpc import (
    CondensedQP,
    CostSpec,
    LinearSystem,
    PredictionMatrices,
    build_prediction,
    condense,
    condensed_objective,
    dare_residual,
    fgm_step_size,
    solve_dare,
    spectral_bounds,
)
from .oracle import (
    active_set_project,
    dp_rate_project,
    exact_project,
    grid_project_2d,
    reference_solve,
)
from .problems import (
    ModelConfig,
    ProblemDef,
    RandomProblem,
    build_qp,
    gen_random_problem,
    load_model_config,
    load_problem,
    sample_x0,
)
from .rateamp import (
    DykstraResult,
    RateAmpSet,
    contains,
    dykstra_project,
    pair_bounds,
    project_group,
    project_pair,
)
from .solvers import (
    ADMMConfig,
    DykstraConfig,
    FGMConfig,
    LiftedConstraints,
    SolveResult,
    admm_setup,
    admm_solve,
    build_lifted,
    fgm_setup,
    fgm_solve,
    memory_footprint,
    warm_start_shift,
)
from .harness import (
    BenchmarkSpec,
    ClosedLoopTrace,
    closed_loop_simulate,
    emit_plotdata,
    run_convergence_trace,
    run_timing_benchmark,
    write_closed_loop_csv,
)

__all__ = [
    "ADMMConfig",
    "BenchmarkSpec",
    "ClosedLoopTrace",
    "CondensedQP",
    "CostSpec",
    "DykstraConfig",
    "DykstraResult",
    "FGMConfig",
    "LiftedConstraints",
    "LinearSystem",
    "ModelConfig",
    "PredictionMatrices",
    "ProblemDef",
    "RandomProblem",
    "RateAmpSet",
    "SolveResult",
    "active_set_project",
    "admm_setup",
    "admm_solve",
    "build_lifted",
    "build_prediction",
    "build_qp",
    "closed_loop_simulate",
    "condense",
    "condensed_objective",
    "contains",
    "dare_residual",
    "dp_rate_project",
    "dykstra_project",
    "emit_plotdata",
    "exact_project",
    "fgm_setup",
    "fgm_solve",
    "fgm_step_size",
    "gen_random_problem",
    "grid_project_2d",
    "load_model_config",
    "load_problem",
    "memory_footprint",
    "pair_bounds",
    "project_group",
    "project_pair",
    "reference_solve",
    "run_convergence_trace",
    "run_timing_benchmark",
    "sample_x0",
    "solve_dare",
    "spectral_bounds",
    "warm_start_shift",
    "write_closed_loop_csv",
]

__version__ = "0.1.0"
